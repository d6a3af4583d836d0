#include "ivtlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ivt/digest.hpp"

namespace ivtlab {

namespace {

using nlohmann::json;

void check_keys(const json& section, const std::string& where, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (allowed.count(key) == 0) throw ConfigError("unknown key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + where + "." + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DatasetConfig parse_dataset(const json& j, const std::filesystem::path& base) {
  DatasetConfig d;
  read(j, "kind", d.kind, "dataset");
  if (d.kind == "gaussian") {
    check_keys(j, "dataset", {"kind", "dim", "classes", "clusters_per_class", "separation",
                              "train_per_class", "test_per_class", "seed"});
    auto& g = d.gaussian;
    read(j, "dim", g.dim, "dataset");
    read(j, "classes", g.classes, "dataset");
    read(j, "clusters_per_class", g.clusters_per_class, "dataset");
    read(j, "separation", g.separation, "dataset");
    read(j, "train_per_class", g.train_per_class, "dataset");
    read(j, "test_per_class", g.test_per_class, "dataset");
    read(j, "seed", g.seed, "dataset");
  } else if (d.kind == "idx") {
    check_keys(j, "dataset", {"kind", "train_images", "train_labels", "test_images", "test_labels"});
    std::string a, b, c, e;
    read(j, "train_images", a, "dataset");
    read(j, "train_labels", b, "dataset");
    read(j, "test_images", c, "dataset");
    read(j, "test_labels", e, "dataset");
    if (a.empty() || b.empty() || c.empty() || e.empty()) {
      throw ConfigError("idx dataset needs train/test image and label paths");
    }
    d.train_images = resolve(base, a);
    d.train_labels = resolve(base, b);
    d.test_images = resolve(base, c);
    d.test_labels = resolve(base, e);
  } else if (d.kind == "csv") {
    check_keys(j, "dataset", {"kind", "train", "test", "label_column", "feature_columns", "delimiter"});
    std::string train, test, delim = ",";
    read(j, "train", train, "dataset");
    read(j, "test", test, "dataset");
    if (train.empty() || test.empty()) throw ConfigError("csv dataset needs train and test paths");
    d.train_csv = resolve(base, train);
    d.test_csv = resolve(base, test);
    read(j, "label_column", d.csv.label_column, "dataset");
    read(j, "feature_columns", d.csv.feature_columns, "dataset");
    read(j, "delimiter", delim, "dataset");
    if (delim.size() != 1) throw ConfigError("'dataset.delimiter' must be one character");
    d.csv.delimiter = delim[0];
  } else {
    throw ConfigError("unknown dataset kind '" + d.kind + "'");
  }
  return d;
}

ivt::MethodSpec parse_method(const json& j, const json& net) {
  check_keys(j, "method",
             {"archetype", "use_ivt", "epochs", "batch_size", "learning_rate", "momentum",
              "ivt_interval", "regularizer_strength", "optimizer", "adam_beta1", "adam_beta2",
              "adam_epsilon", "shuffle", "reset_optimizer_per_task", "reset_optimizer_on_ivt",
              "fisher_mode", "fisher_source", "memory"});
  ivt::MethodSpec m;
  std::string archetype = "naive", optimizer = "sgd", fisher_mode = "batch_mean_sq",
              fisher_source = "last_epoch";
  read(j, "archetype", archetype, "method");
  read(j, "use_ivt", m.use_ivt, "method");
  auto& t = m.train;
  read(j, "epochs", t.epochs, "method");
  read(j, "batch_size", t.batch_size, "method");
  read(j, "learning_rate", t.learning_rate, "method");
  read(j, "momentum", t.momentum, "method");
  read(j, "ivt_interval", t.ivt_interval, "method");
  read(j, "regularizer_strength", t.regularizer_strength, "method");
  read(j, "optimizer", optimizer, "method");
  read(j, "adam_beta1", t.adam_beta1, "method");
  read(j, "adam_beta2", t.adam_beta2, "method");
  read(j, "adam_epsilon", t.adam_epsilon, "method");
  read(j, "shuffle", t.shuffle, "method");
  read(j, "reset_optimizer_per_task", t.reset_optimizer_per_task, "method");
  read(j, "reset_optimizer_on_ivt", t.reset_optimizer_on_ivt, "method");
  read(j, "fisher_mode", fisher_mode, "method");
  read(j, "fisher_source", fisher_source, "method");
  try {
    m.archetype = ivt::archetype_from_string(archetype);
    t.optimizer = ivt::optimizer_from_string(optimizer);
  } catch (const ivt::PreconditionError& e) {
    throw ConfigError(e.what());
  }
  if (fisher_mode == "batch_mean_sq") {
    t.fisher_mode = ivt::FisherMode::batch_mean_sq;
  } else if (fisher_mode == "per_sample_sq") {
    t.fisher_mode = ivt::FisherMode::per_sample_sq;
  } else {
    throw ConfigError("unknown fisher_mode '" + fisher_mode + "'");
  }
  if (fisher_source == "last_epoch") {
    t.fisher_source = ivt::FisherSource::last_epoch;
  } else if (fisher_source == "running_mean") {
    t.fisher_source = ivt::FisherSource::running_mean;
  } else {
    throw ConfigError("unknown fisher_source '" + fisher_source + "'");
  }
  if (j.contains("memory")) {
    const json& mem = j.at("memory");
    check_keys(mem, "method.memory", {"per_class_budget", "policy"});
    ivt::MemorySettings s;
    std::string policy = "random";
    read(mem, "per_class_budget", s.per_class_budget, "method.memory");
    read(mem, "policy", policy, "method.memory");
    try {
      s.policy = ivt::memory_policy_from_string(policy);
    } catch (const ivt::PreconditionError& e) {
      throw ConfigError(e.what());
    }
    m.memory = s;
  }

  check_keys(net, "network", {"hidden", "activation"});
  m.network.hidden_dims = {16};
  std::string activation = "relu";
  read(net, "hidden", m.network.hidden_dims, "network");
  read(net, "activation", activation, "network");
  try {
    m.network.activation = ivt::activation_from_string(activation);
    m.validate();
  } catch (const ivt::PreconditionError& e) {
    throw ConfigError(e.what());
  }
  return m;
}

void refresh_digests(ExperimentConfig& c) {
  json content = c.canonical;
  content.erase("output");
  c.digest = digest_of(content);
  json data = json::object();
  data["dataset"] = c.canonical.value("dataset", json::object());
  data["stream"] = c.canonical.value("stream", json::object());
  c.dataset_digest = digest_of(data);
}

}  // namespace

std::string ExperimentConfig::label() const {
  std::string s(ivt::to_string(method.archetype));
  if (method.use_ivt) s += "+ivt";
  return s;
}

std::string digest_of(const nlohmann::json& canonical) {
  return ivt::hex64(ivt::fnv1a64(canonical.dump()));
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(j, "config", {"dataset", "stream", "network", "method", "seeds", "output"});
  ExperimentConfig c;
  c.canonical = j;
  c.dataset = parse_dataset(j.value("dataset", json::object()), base_dir);

  const json stream = j.value("stream", json::object());
  check_keys(stream, "stream", {"base_classes", "num_tasks", "class_order_seed"});
  read(stream, "base_classes", c.stream.base_classes, "stream");
  read(stream, "num_tasks", c.stream.num_tasks, "stream");
  read(stream, "class_order_seed", c.stream.class_order_seed, "stream");

  c.method = parse_method(j.value("method", json::object()), j.value("network", json::object()));
  read(j, "seeds", c.seeds, "config");
  if (c.seeds.empty()) throw ConfigError("'seeds' must list at least one seed");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw ConfigError("'seeds' contains duplicates");
  }

  const json output = j.value("output", json::object());
  check_keys(output, "output", {"dir", "checkpoints"});
  if (output.contains("dir")) {
    std::string dir;
    read(output, "dir", dir, "output");
    c.output_dir = dir;
  }
  read(output, "checkpoints", c.write_checkpoints, "output");
  refresh_digests(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    ExperimentConfig c = parse_config(ss.str(), path.parent_path());
    c.source = path;
    return c;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void override_seeds(ExperimentConfig& config, std::vector<std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("seed override is empty");
  config.seeds = std::move(seeds);
  config.canonical["seeds"] = config.seeds;
  refresh_digests(config);
}

ivt::TrainTestPair load_dataset(const DatasetConfig& d) {
  if (d.kind == "gaussian") return ivt::synth_gaussian_tasks(d.gaussian);
  if (d.kind == "idx") {
    return {ivt::load_idx(d.train_images, d.train_labels, ivt::Split::train),
            ivt::load_idx(d.test_images, d.test_labels, ivt::Split::test)};
  }
  return {ivt::load_csv(d.train_csv, d.csv, ivt::Split::train),
          ivt::load_csv(d.test_csv, d.csv, ivt::Split::test)};
}

ivt::TaskStream build_stream(const ExperimentConfig& config) {
  const ivt::TrainTestPair data = load_dataset(config.dataset);
  return ivt::make_incremental_stream(data.train, data.test, config.stream.base_classes,
                                      config.stream.num_tasks, config.stream.class_order_seed);
}

}  // namespace ivtlab
