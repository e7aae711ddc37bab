#include "calab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "calab/exact_dp.hpp"

namespace calab {

namespace fs = std::filesystem;

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Ca: return "ca";
    case Algorithm::Ac: return "ac";
    case Algorithm::QLinear: return "q_linear";
    case Algorithm::LinearCa: return "linear_ca";
    case Algorithm::LinearAc: return "linear_ac";
    case Algorithm::NnCa: return "nn_ca";
    case Algorithm::NnAc: return "nn_ac";
    case Algorithm::DqnLite: return "dqn_lite";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (auto a : {Algorithm::Ca, Algorithm::Ac, Algorithm::QLinear, Algorithm::LinearCa,
                 Algorithm::LinearAc, Algorithm::NnCa, Algorithm::NnAc, Algorithm::DqnLite}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

TabularMdp MdpSource::load() const {
  if (file && grid) throw ConfigError("mdp source must be either a file or a gridworld, not both");
  if (file) return load_mdp(*file);
  if (grid) return build(*grid);
  throw ConfigError("config has no mdp source");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json mdp_doc;
  if (mdp.file) mdp_doc["file"] = mdp.file->string();
  if (mdp.grid) mdp_doc["gridworld"] = calab::to_json(*mdp.grid);
  return {{"name", name},
          {"mdp", mdp_doc},
          {"algorithm", calab::to_string(algorithm)},
          {"schedule_a", calab::to_json(engine.schedule_a)},
          {"schedule_b", calab::to_json(engine.schedule_b)},
          {"theta0", engine.theta0},
          {"steps", engine.total_steps},
          {"metric_period", engine.metric_period},
          {"sampler", calab::to_json(engine.sampler)},
          {"record_time", engine.record_time},
          {"rollout",
           {{"period", engine.rollout_period},
            {"horizon", engine.rollout_horizon},
            {"episodes", engine.rollout_episodes}}},
          {"approximator", calab::to_json(approx)},
          {"seeds", seeds}};
}

RunConfig RunConfig::from_json(const nlohmann::json& doc, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
    cfg.name = doc.value("name", cfg.name);
    const auto& mdp = doc.at("mdp");
    if (mdp.contains("file")) {
      fs::path p = mdp.at("file").get<std::string>();
      cfg.mdp.file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (mdp.contains("gridworld")) cfg.mdp.grid = grid_from_json(mdp.at("gridworld"));
    if (!cfg.mdp.file && !cfg.mdp.grid) throw ConfigError("mdp needs 'file' or 'gridworld'");
    if (cfg.mdp.file && cfg.mdp.grid) throw ConfigError("mdp takes 'file' or 'gridworld', not both");
    cfg.algorithm = algorithm_from_string(doc.value("algorithm", std::string("ca")));
    if (doc.contains("schedule_a")) cfg.engine.schedule_a = schedule_from_json(doc.at("schedule_a"));
    if (doc.contains("schedule_b")) cfg.engine.schedule_b = schedule_from_json(doc.at("schedule_b"));
    cfg.engine.theta0 = doc.value("theta0", cfg.engine.theta0);
    if (doc.contains("steps")) {
      const auto& s = doc.at("steps");
      // Accept 1e7-style numbers as long as they are whole.
      const double v = s.get<double>();
      if (!(v >= 0.0) || std::floor(v) != v) throw ConfigError("steps must be a non-negative integer");
      cfg.engine.total_steps = static_cast<std::uint64_t>(v);
    }
    cfg.engine.metric_period = doc.value("metric_period", cfg.engine.metric_period);
    if (doc.contains("sampler")) cfg.engine.sampler = sampler_from_json(doc.at("sampler"));
    cfg.engine.record_time = doc.value("record_time", cfg.engine.record_time);
    if (doc.contains("rollout")) {
      const auto& r = doc.at("rollout");
      cfg.engine.rollout_period = r.value("period", cfg.engine.rollout_period);
      cfg.engine.rollout_horizon = r.value("horizon", cfg.engine.rollout_horizon);
      cfg.engine.rollout_episodes = r.value("episodes", cfg.engine.rollout_episodes);
    }
    if (doc.contains("approximator")) cfg.approx = approx_from_json(doc.at("approximator"));
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  if (cfg.seeds.empty()) throw ConfigError("run config needs at least one seed");
  if (cfg.engine.metric_period == 0) throw ConfigError("metric_period must be at least 1");
  if (!(cfg.engine.theta0 > 0.0)) throw ConfigError("theta0 must be positive");
  return cfg;
}

std::string RunConfig::hash() const {
  nlohmann::json doc = to_json();
  doc.erase("seeds");
  return hex_digest(fnv1a(doc.dump()));
}

std::string MetricSummary::formatted() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4g ± %.4g", mean, stddev);
  return buf;
}

MetricSummary summarize_values(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("summarize_values: empty sample");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= double(values.size());
  return {mean, std::sqrt(var)};
}

nlohmann::json AggregateSummary::to_json() const {
  auto metric = [](const MetricSummary& m) {
    return nlohmann::json{{"mean", m.mean}, {"std", m.stddev}, {"formatted", m.formatted()}};
  };
  return {{"name", name},
          {"config_hash", config_hash},
          {"seeds", seeds},
          {"failed_seeds", failed_seeds},
          {"final_step", final_step},
          {"std_convention", "population"},
          {"value_error_l2", metric(value_error_l2)},
          {"value_error_sup", metric(value_error_sup)},
          {"avg_reward", metric(avg_reward)},
          {"elapsed_s", metric(elapsed_seconds)}};
}

bool ExperimentResult::all_failed() const {
  return std::none_of(runs.begin(), runs.end(), [](const SeedOutcome& r) { return r.trace.has_value(); });
}

AggregateSummary aggregate(const RunConfig& config, const std::vector<SeedOutcome>& runs) {
  AggregateSummary s;
  s.name = config.name;
  s.config_hash = config.hash();
  std::vector<double> l2, sup, reward, elapsed;
  for (const auto& r : runs) {
    s.seeds.push_back(r.seed);
    if (!r.trace || r.trace->rows.empty()) {
      s.failed_seeds.push_back(r.seed);
      continue;
    }
    const MetricRow& last = r.trace->rows.back();
    s.final_step = last.step;
    l2.push_back(last.value_error_l2);
    sup.push_back(last.value_error_sup);
    reward.push_back(last.avg_reward);
    elapsed.push_back(last.elapsed_seconds);
  }
  if (!l2.empty()) {
    s.value_error_l2 = summarize_values(l2);
    s.value_error_sup = summarize_values(sup);
    s.avg_reward = summarize_values(reward);
    s.elapsed_seconds = summarize_values(elapsed);
  }
  return s;
}

ValueTable optimal_values(const TabularMdp& mdp, const std::optional<fs::path>& cache_dir) {
  const std::string key = hex_digest(mdp.digest());
  fs::path cache_file;
  if (cache_dir) {
    cache_file = *cache_dir / ("vstar_" + key + ".json");
    std::ifstream in(cache_file);
    if (in) {
      try {
        const auto doc = nlohmann::json::parse(in);
        const auto values = doc.at("values").get<std::vector<double>>();
        if (doc.at("digest").get<std::string>() == key && values.size() == mdp.n_states()) {
          return Eigen::Map<const ValueTable>(values.data(), static_cast<Eigen::Index>(values.size()));
        }
      } catch (const nlohmann::json::exception&) {
        // Unreadable cache entries are recomputed.
      }
    }
  }
  const double gamma = mdp.discount();
  const auto report = value_iteration(mdp, 1e-8 * (1.0 - gamma) / gamma);
  if (!report.converged) throw InternalError("value iteration did not converge while computing V*");
  if (cache_dir) {
    fs::create_directories(*cache_dir);
    std::ofstream out(cache_file);
    out << nlohmann::json{{"digest", key},
                          {"values", std::vector<double>(report.value.data(),
                                                         report.value.data() + report.value.size())}}
               .dump()
        << '\n';
  }
  return report.value;
}

namespace {

std::optional<ApproxAlgorithm> approx_kind(Algorithm a) {
  switch (a) {
    case Algorithm::Ca:
    case Algorithm::Ac: return std::nullopt;
    case Algorithm::QLinear: return ApproxAlgorithm::QLinear;
    case Algorithm::LinearCa: return ApproxAlgorithm::LinearCa;
    case Algorithm::LinearAc: return ApproxAlgorithm::LinearAc;
    case Algorithm::NnCa: return ApproxAlgorithm::NnCa;
    case Algorithm::NnAc: return ApproxAlgorithm::NnAc;
    case Algorithm::DqnLite: return ApproxAlgorithm::DqnLite;
  }
  return std::nullopt;
}

SeedOutcome run_one(const RunConfig& config, const TabularMdp& mdp, const ValueTable& v_star,
                    std::uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  EngineConfig engine = config.engine;
  engine.seed = seed;
  try {
    if (const auto kind = approx_kind(config.algorithm)) {
      const std::vector<std::size_t> dims =
          config.mdp.grid ? config.mdp.grid->dims : std::vector<std::size_t>{};
      out.trace = run_approx(*kind, engine, config.approx, mdp, v_star, dims);
    } else {
      engine.mode = config.algorithm == Algorithm::Ca ? Mode::CriticActor : Mode::ActorCritic;
      out.trace = run(engine, mdp, v_star);
    }
  } catch (const RunAborted& e) {
    out.error = e.what();
    out.abort_snapshot = e.snapshot();
  }
  return out;
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config, const std::vector<std::uint64_t>& seeds,
                                std::size_t workers, const std::optional<fs::path>& cache_dir) {
  if (seeds.empty()) throw ConfigError("run_experiment needs at least one seed");
  const TabularMdp mdp = config.mdp.load();
  config.engine.validate(mdp);
  config.approx.validate();
  const ValueTable v_star = optimal_values(mdp, cache_dir);

  ExperimentResult result;
  result.runs.resize(seeds.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, seeds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < seeds.size(); k = next++) {
      result.runs[k] = run_one(config, mdp, v_star, seeds[k]);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  result.summary = aggregate(config, result.runs);
  return result;
}

void emit_csv(const RunTrace& trace, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& r : trace.rows) {
    out << r.step << ',' << format_number(r.value_error_l2) << ',' << format_number(r.value_error_sup)
        << ',' << format_number(r.avg_reward) << ',' << format_number(r.elapsed_seconds) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<MetricRow> parse_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ConfigError(path.string() + ": unexpected CSV header");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ConfigError(path.string() + ": malformed CSV row");
    rows.push_back({std::stoull(cells[0]), std::stod(cells[1]), std::stod(cells[2]),
                    std::stod(cells[3]), std::stod(cells[4])});
  }
  return rows;
}

void emit_rollout_csv(const RunTrace& trace, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,greedy_avg_reward\n";
  for (const auto& r : trace.rollouts) out << r.step << ',' << format_number(r.avg_reward) << '\n';
}

void emit_summary(const AggregateSummary& summary, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << summary.to_json().dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<fs::path> write_experiment(const ExperimentResult& result, const RunConfig& config,
                                       const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  for (const auto& r : result.runs) {
    const std::string stem = config.name + "_seed" + std::to_string(r.seed);
    if (r.trace) {
      written.push_back(out_dir / (stem + ".csv"));
      emit_csv(*r.trace, written.back());
      if (!r.trace->rollouts.empty()) {
        written.push_back(out_dir / (stem + "_rollout.csv"));
        emit_rollout_csv(*r.trace, written.back());
      }
    } else {
      written.push_back(out_dir / (stem + "_abort.json"));
      std::ofstream out(written.back());
      out << nlohmann::json{{"error", r.error}, {"snapshot", r.abort_snapshot}}.dump(2) << '\n';
    }
  }
  written.push_back(out_dir / (config.name + "_summary.json"));
  emit_summary(result.summary, written.back());
  return written;
}

std::vector<RunConfig> expand_sweep(const nlohmann::json& sweep, const fs::path& base_dir) {
  if (!sweep.contains("base")) throw ConfigError("sweep config needs a 'base' run config");
  std::vector<nlohmann::json> variants{sweep.at("base")};
  std::vector<std::string> labels{sweep.at("base").value("name", std::string("run"))};
  if (sweep.contains("grid")) {
    for (const auto& [key, values] : sweep.at("grid").items()) {
      if (!values.is_array() || values.empty()) {
        throw ConfigError("sweep grid entry '" + key + "' must be a non-empty list");
      }
      std::vector<nlohmann::json> next;
      std::vector<std::string> next_labels;
      for (std::size_t v = 0; v < variants.size(); ++v) {
        for (const auto& value : values) {
          nlohmann::json doc = variants[v];
          try {
            if (!key.empty() && key.front() == '/') {
              doc[nlohmann::json::json_pointer(key)] = value;
            } else {
              doc[key] = value;
            }
          } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad sweep key '" + key + "': " + e.what());
          }
          std::string tag = value.is_string() ? value.get<std::string>() : value.dump();
          std::replace_if(tag.begin(), tag.end(), [](char c) { return !std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-'; }, '_');
          std::string name = key;
          std::replace(name.begin(), name.end(), '/', '_');
          next.push_back(doc);
          next_labels.push_back(labels[v] + "__" + name + "-" + tag);
        }
      }
      variants = std::move(next);
      labels = std::move(next_labels);
    }
  }
  std::vector<RunConfig> out;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    variants[v]["name"] = labels[v];
    out.push_back(RunConfig::from_json(variants[v], base_dir));
  }
  return out;
}

std::string comparison_table(const std::vector<AggregateSummary>& summaries) {
  // Pads by code points so the multibyte plus-minus sign keeps columns aligned.
  auto pad = [](const std::string& s, std::size_t width) {
    const auto glyphs = static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
    return s + std::string(width > glyphs ? width - glyphs : 0, ' ');
  };
  std::size_t width = 10;
  for (const auto& s : summaries) width = std::max(width, s.name.size());
  std::ostringstream os;
  os << pad("config", width) << " | " << pad("value error (L2)", 22) << " | " << pad("value error (sup)", 22)
     << " | " << pad("average reward", 22) << " | " << pad("time (s)", 18) << " | seeds\n"
     << std::string(width + 104, '-') << '\n';
  for (const auto& s : summaries) {
    os << pad(s.name, width) << " | " << pad(s.value_error_l2.formatted(), 22) << " | "
       << pad(s.value_error_sup.formatted(), 22) << " | " << pad(s.avg_reward.formatted(), 22) << " | "
       << pad(s.elapsed_seconds.formatted(), 18) << " | " << s.seeds.size() - s.failed_seeds.size() << '/'
       << s.seeds.size() << '\n';
  }
  return os.str();
}

fs::path resolve_output_dir(const std::optional<fs::path>& flag, const fs::path& fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CALAB_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return fallback;
}

}  // namespace calab
