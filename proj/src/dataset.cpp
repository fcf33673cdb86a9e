#include "kancql/dataset.hpp"

#include <fstream>
#include <limits>

namespace kancql {

namespace {

struct Columns {
  std::vector<double> obs, actions, rewards, next_obs;
  std::vector<std::uint8_t> dones;
};

// Appends whole episodes of `policy` until `quota` rows exist, then truncates.
void collect(const EnvSpec& spec, const BehaviorPolicy& policy, std::size_t quota, Rng& rng,
             Columns& out) {
  std::size_t rows = 0;
  while (rows < quota) {
    EnvState s = env_reset(spec, rng);
    bool done = false;
    while (!done && rows < quota) {
      const auto o = observe(spec, s);
      const auto a = policy.act(s, rng);
      StepResult step = env_step(spec, s, a);
      const auto o2 = observe(spec, step.next);
      out.obs.insert(out.obs.end(), o.begin(), o.end());
      out.actions.insert(out.actions.end(), a.begin(), a.end());
      out.rewards.push_back(step.reward);
      out.next_obs.insert(out.next_obs.end(), o2.begin(), o2.end());
      out.dones.push_back(step.done ? 1 : 0);
      done = step.done;
      s = std::move(step.next);
      ++rows;
    }
  }
}

bool continues(const Dataset& ds, std::size_t i) {
  if (ds.dones[i]) return false;
  if (i + 1 >= ds.size()) return false;
  const auto next = ds.next_obs.row(i);
  const auto follow = ds.obs.row(i + 1);
  return std::equal(next.begin(), next.end(), follow.begin());
}

void write_name(std::ostream& os, std::string_view name) {
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("save_dataset: name too long");
  }
  binio::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
}

std::string read_name(std::istream& is, const char* what) {
  const auto len = binio::read_le<std::uint16_t>(is, what);
  return binio::read_bytes(is, len, what);
}

}  // namespace

std::size_t Dataset::trajectory_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!continues(*this, i)) ++count;
  }
  return count;
}

std::vector<double> Dataset::trajectory_returns() const {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    acc += rewards[i];
    if (!continues(*this, i)) {
      out.push_back(acc);
      acc = 0.0;
    }
  }
  return out;
}

Batch take_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  const std::size_t od = ds.env.obs_dim;
  const std::size_t ad = ds.env.act_dim;
  Batch b{Matrix(rows.size(), od), Matrix(rows.size(), ad), Matrix(rows.size(), 1),
          Matrix(rows.size(), od), Matrix(rows.size(), 1)};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    if (i >= ds.size()) throw std::out_of_range("take_rows: row index out of range");
    std::copy_n(ds.obs.row(i).begin(), od, b.obs.row(k).begin());
    std::copy_n(ds.actions.row(i).begin(), ad, b.actions.row(k).begin());
    std::copy_n(ds.next_obs.row(i).begin(), od, b.next_obs.row(k).begin());
    b.rewards[k] = ds.rewards[i];
    b.dones[k] = ds.dones[i] ? 1.0 : 0.0;
  }
  return b;
}

Batch sample_batch(const Dataset& ds, std::size_t batch_size, Rng& rng) {
  if (ds.size() == 0) throw std::invalid_argument("sample_batch: empty dataset");
  std::vector<std::size_t> rows(batch_size);
  for (auto& r : rows) r = static_cast<std::size_t>(rng.below(ds.size()));
  return take_rows(ds, rows);
}

double mean_policy_return(const EnvSpec& spec, const BehaviorPolicy& policy, std::size_t episodes,
                          Rng& rng) {
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    EnvState s = env_reset(spec, rng);
    bool done = false;
    while (!done) {
      StepResult step = env_step(spec, s, policy.act(s, rng));
      total += step.reward;
      done = step.done;
      s = std::move(step.next);
    }
  }
  return total / static_cast<double>(episodes);
}

Dataset generate_dataset(const EnvSpec& spec, DatasetTier tier, std::size_t n_transitions,
                         std::uint64_t seed) {
  if (n_transitions < spec.horizon) {
    throw std::invalid_argument("generate_dataset: need at least one horizon of transitions (" +
                                std::to_string(spec.horizon) + ")");
  }
  const Rng root(seed);
  const auto policies = scripted_policy(tier, spec);

  Columns cols;
  const std::size_t parts = policies.size();
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t quota =
        n_transitions / parts + (p + 1 == parts ? n_transitions % parts : 0);
    Rng part_rng = root.split("part" + std::to_string(p));
    collect(spec, policies[p], quota, part_rng, cols);
  }

  Dataset ds{spec, tier, seed};
  const std::size_t n = cols.dones.size();
  ds.obs = Matrix(n, spec.obs_dim, std::move(cols.obs));
  ds.actions = Matrix(n, spec.act_dim, std::move(cols.actions));
  ds.rewards = Matrix(n, 1, std::move(cols.rewards));
  ds.next_obs = Matrix(n, spec.obs_dim, std::move(cols.next_obs));
  ds.dones = std::move(cols.dones);

  Rng random_rng = root.split("reference-random");
  Rng medium_rng = root.split("reference-medium");
  Rng expert_rng = root.split("reference-expert");
  ds.random_score =
      mean_policy_return(spec, BehaviorPolicy::uniform(spec), kReferenceEpisodes, random_rng);
  ds.expert_score = mean_policy_return(spec, BehaviorPolicy::controller(spec, 1.0, 0.0),
                                       kReferenceEpisodes, expert_rng);
  const double medium_score =
      mean_policy_return(spec, scripted_policy(DatasetTier::Medium, spec).front(),
                         kReferenceEpisodes, medium_rng);
  if (!(ds.expert_score > medium_score && medium_score > ds.random_score)) {
    throw std::logic_error("generate_dataset: tier ordering expert > medium > random violated on " +
                           spec.name);
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const std::size_t n = ds.size();
  if (n == 0) throw FormatError(FormatErrorKind::EmptyDataset, "refusing to save an empty dataset");
  if (ds.obs.rows() != n || ds.actions.rows() != n || ds.rewards.size() != n ||
      ds.next_obs.rows() != n || ds.obs.cols() != ds.env.obs_dim ||
      ds.next_obs.cols() != ds.env.obs_dim || ds.actions.cols() != ds.env.act_dim) {
    throw FormatError(FormatErrorKind::DimMismatch, "dataset columns are inconsistent");
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kDatasetMagic, 4);
  binio::write_le<std::uint32_t>(os, kDatasetVersion);
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.env.obs_dim));
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.env.act_dim));
  binio::write_le<std::uint64_t>(os, n);
  binio::write_le<double>(os, ds.random_score);
  binio::write_le<double>(os, ds.expert_score);
  write_name(os, ds.env.name);
  write_name(os, to_string(ds.tier));
  binio::write_le<double>(os, ds.obs.values());
  binio::write_le<double>(os, ds.actions.values());
  binio::write_le<double>(os, ds.rewards.values());
  binio::write_le<double>(os, ds.next_obs.values());
  binio::write_le<std::uint8_t>(os, std::span<const std::uint8_t>(ds.dones));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");

  if (binio::read_bytes(is, 4, "magic") != std::string_view(kDatasetMagic, 4)) {
    throw FormatError(FormatErrorKind::BadMagic, "'" + path.string() + "' is not an ORDS file");
  }
  const auto version = binio::read_le<std::uint32_t>(is, "version");
  if (version != kDatasetVersion) {
    throw FormatError(FormatErrorKind::VersionMismatch,
                      "ORDS version " + std::to_string(version) + ", expected " +
                          std::to_string(kDatasetVersion));
  }
  const auto obs_dim = binio::read_le<std::uint32_t>(is, "obs_dim");
  const auto act_dim = binio::read_le<std::uint32_t>(is, "act_dim");
  const auto n64 = binio::read_le<std::uint64_t>(is, "n");
  const double random_score = binio::read_le<double>(is, "random_score");
  const double expert_score = binio::read_le<double>(is, "expert_score");
  const std::string env_name = read_name(is, "env name");
  const std::string tier_name = read_name(is, "tier name");

  EnvSpec env;
  DatasetTier tier;
  try {
    env = find_env(env_name);
    tier = parse_tier(tier_name);
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrorKind::DimMismatch, e.what());
  }
  if (obs_dim != env.obs_dim || act_dim != env.act_dim) {
    throw FormatError(FormatErrorKind::DimMismatch,
                      "header dims (" + std::to_string(obs_dim) + ", " + std::to_string(act_dim) +
                          ") do not match environment " + env.name);
  }
  if (n64 == 0) throw FormatError(FormatErrorKind::EmptyDataset, "ORDS file holds no transitions");

  // Reject sizes the remaining file cannot hold before allocating.
  const auto here = is.tellg();
  is.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(is.tellg() - here);
  is.seekg(here);
  const std::uint64_t row_bytes = (2ull * obs_dim + act_dim + 1) * sizeof(double) + 1;
  if (n64 > remaining / row_bytes) {
    throw FormatError(FormatErrorKind::Truncated, "payload shorter than n=" + std::to_string(n64));
  }
  const auto n = static_cast<std::size_t>(n64);

  Dataset ds{env, tier, std::nullopt, random_score, expert_score};
  ds.obs = Matrix(n, obs_dim);
  ds.actions = Matrix(n, act_dim);
  ds.rewards = Matrix(n, 1);
  ds.next_obs = Matrix(n, obs_dim);
  ds.dones.resize(n);
  binio::read_le<double>(is, ds.obs.values(), "observations");
  binio::read_le<double>(is, ds.actions.values(), "actions");
  binio::read_le<double>(is, ds.rewards.values(), "rewards");
  binio::read_le<double>(is, ds.next_obs.values(), "next observations");
  binio::read_le<std::uint8_t>(is, std::span<std::uint8_t>(ds.dones), "done flags");
  return ds;
}

}  // namespace kancql
