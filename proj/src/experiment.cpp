#include "restyle/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "restyle/classifier.hpp"
#include "restyle/corpus_io.hpp"
#include "restyle/embedder.hpp"
#include "restyle/error.hpp"
#include "restyle/neural_backend.hpp"
#include "restyle/parallel.hpp"
#include "restyle/persistence.hpp"
#include "restyle/rng.hpp"

namespace restyle {

namespace {

constexpr Condition kAllConditions[] = {Condition::Hard,      Condition::Soft,      Condition::NoControl,
                                        Condition::Teacher,   Condition::StudentK1, Condition::StudentK2,
                                        Condition::StudentK4};

bool is_student(Condition c) {
  return c == Condition::StudentK1 || c == Condition::StudentK2 || c == Condition::StudentK4;
}

std::size_t student_k(Condition c) {
  switch (c) {
    case Condition::StudentK1: return 1;
    case Condition::StudentK2: return 2;
    case Condition::StudentK4: return 4;
    default: break;
  }
  throw std::logic_error("not a student condition");
}

/// Runs fn, prefixing any failure with the stage name while keeping the
/// error category.
template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError("stage '" + name + "' failed: " + e.what());
  } catch (const BackendError& e) {
    throw BackendError("stage '" + name + "' failed: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("stage '" + name + "' failed: " + e.what());
  }
}

void check_keys(const nlohmann::json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!known.count(key)) throw std::invalid_argument("unknown " + where + " key '" + key + "'");
}

NeuralHyper parse_hyper(const nlohmann::json& j, NeuralHyper h, const std::string& where) {
  check_keys(j, {"dim", "window", "learning_rate", "epochs", "init_scale", "max_steps"}, where);
  if (j.contains("dim")) h.dim = j["dim"].get<std::size_t>();
  if (j.contains("window")) h.window = j["window"].get<std::size_t>();
  if (j.contains("learning_rate")) h.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("epochs")) h.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("init_scale")) h.init_scale = j["init_scale"].get<double>();
  if (j.contains("max_steps")) h.max_steps = j["max_steps"].get<std::size_t>();
  return h;
}

nlohmann::json hyper_json(const NeuralHyper& h) {
  return {{"dim", h.dim},       {"window", h.window},         {"learning_rate", h.learning_rate},
          {"epochs", h.epochs}, {"init_scale", h.init_scale}, {"max_steps", h.max_steps}};
}

std::string control_source_name(ControlSource s) {
  switch (s) {
    case ControlSource::Classifier: return "classifier";
    case ControlSource::Gold: return "gold";
    case ControlSource::Constant: return "constant";
  }
  return "classifier";
}

ControlSource parse_control_source(const std::string& s) {
  if (s == "classifier") return ControlSource::Classifier;
  if (s == "gold") return ControlSource::Gold;
  if (s == "constant") return ControlSource::Constant;
  throw std::invalid_argument("unknown control source '" + s + "'");
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Components shared read-only by every cell.
struct Shared {
  LabelSet labels;
  std::vector<LabeledExample> corpus;
  std::vector<TestItem> test;
  std::shared_ptr<const Vocab> vocab;
  std::unique_ptr<NaiveBayesClassifier> classifier;
  std::unique_ptr<TfIdfEmbedder> embedder;
  std::unique_ptr<NgramLM> lm;
};

enum class CellKind { Hard, Soft, NoControl, Distill };

struct Cell {
  CellKind kind;
  std::uint64_t seed;
};

struct CellOutput {
  std::vector<ExperimentRow> rows;
  std::vector<std::pair<std::string, std::size_t>> pair_counts;
};

ExperimentRow make_row(Condition c, std::size_t k, std::uint64_t seed, const EvalReport& rep) {
  return {c, k, seed, rep.accuracy, rep.semantic, rep.g, rep.s_bleu, rep.fluency};
}

EvalReport score(const Shared& sh, const std::vector<TokenSeq>& outputs, const ExperimentConfig& cfg) {
  std::vector<EvalRecord> records;
  records.reserve(sh.test.size());
  for (std::size_t i = 0; i < sh.test.size(); ++i)
    records.push_back({sh.test[i].source, outputs[i], sh.test[i].reference, sh.test[i].target_label});
  return evaluate(records, *sh.classifier, *sh.embedder, *sh.lm, cfg.g_mode, cfg.semantic_mode, 1);
}

class CellRunner {
 public:
  CellRunner(const Shared& sh, const ExperimentConfig& cfg) : sh_(sh), cfg_(cfg) {}

  CellOutput run(const Cell& cell) const {
    CellOutput out;
    switch (cell.kind) {
      case CellKind::Hard: denoise(Condition::Hard, MaskMode::Hard, false, cell.seed, out); break;
      case CellKind::Soft: denoise(Condition::Soft, MaskMode::Soft, false, cell.seed, out); break;
      case CellKind::NoControl: denoise(Condition::NoControl, cfg_.mask.mode, true, cell.seed, out); break;
      case CellKind::Distill: distill(cell.seed, out); break;
    }
    return out;
  }

 private:
  std::string tag(Condition c, std::uint64_t seed) const {
    return to_string(c) + ", seed " + std::to_string(seed);
  }

  std::unique_ptr<InfillBackend> train_system(Condition c, MaskMode mode, bool constant, std::uint64_t seed,
                                              CellOutput& out) const {
    MaskSpec spec = cfg_.mask;
    spec.mode = mode;
    const auto pairs = stage("build denoising data (" + tag(c, seed) + ")", [&] {
      return build_denoising_data(sh_.corpus, *sh_.classifier, spec, cfg_.variants_per_example, mix(seed, 11),
                                  constant ? ControlSource::Constant : cfg_.control_source);
    });
    out.pair_counts.emplace_back(tag(c, seed), pairs.size());
    BackendHyper hyper;
    hyper.neural = cfg_.neural;
    return stage("train backend (" + tag(c, seed) + ")",
                 [&] { return backend_train(cfg_.backend, sh_.vocab, pairs, hyper, mix(seed, 12)); });
  }

  TransferSettings settings(std::size_t k, MaskMode mode, bool constant) const {
    TransferSettings s;
    s.k = k;
    s.mask = cfg_.mask;
    s.mask.mode = mode;
    s.gen.temperature = cfg_.temperature;
    s.gen.mode = DecodeMode::Sample;
    s.gen.max_len = cfg_.max_len;
    s.policy = cfg_.policy;
    if (constant) s.constant_control = 0;
    return s;
  }

  std::vector<TokenSeq> transfer_test(const InfillBackend& backend, const TransferSettings& s,
                                      std::uint64_t seed) const {
    std::vector<TransferRequest> requests;
    requests.reserve(sh_.test.size());
    for (std::size_t i = 0; i < sh_.test.size(); ++i)
      requests.push_back(
          make_request(sh_.test[i].source, sh_.test[i].source_label, sh_.test[i].target_label, s, mix(seed, 13), i));
    const TransferComponents comp{backend, *sh_.classifier, *sh_.embedder};
    std::vector<TokenSeq> outputs;
    for (auto& r : transfer_batch(comp, requests, 1)) outputs.push_back(std::move(r.output));
    return outputs;
  }

  void denoise(Condition c, MaskMode mode, bool constant, std::uint64_t seed, CellOutput& out) const {
    const auto backend = train_system(c, mode, constant, seed, out);
    for (std::size_t k : cfg_.k_list) {
      const auto outputs = stage("transfer (" + tag(c, seed) + ", K=" + std::to_string(k) + ")",
                                 [&] { return transfer_test(*backend, settings(k, mode, constant), seed); });
      const auto rep = stage("evaluate (" + tag(c, seed) + ")", [&] { return score(sh_, outputs, cfg_); });
      out.rows.push_back(make_row(c, k, seed, rep));
    }
  }

  bool wants(Condition c) const {
    return std::find(cfg_.conditions.begin(), cfg_.conditions.end(), c) != cfg_.conditions.end();
  }

  void distill(std::uint64_t seed, CellOutput& out) const {
    CellOutput scratch;
    const auto teacher = train_system(Condition::Teacher, MaskMode::Hard, false, seed, scratch);
    const auto teacher_settings = settings(cfg_.teacher_k, MaskMode::Hard, false);
    if (wants(Condition::Teacher)) {
      const auto outputs = stage("transfer (" + tag(Condition::Teacher, seed) + ")",
                                 [&] { return transfer_test(*teacher, teacher_settings, seed); });
      const auto rep = stage("evaluate (" + tag(Condition::Teacher, seed) + ")",
                             [&] { return score(sh_, outputs, cfg_); });
      out.rows.push_back(make_row(Condition::Teacher, cfg_.teacher_k, seed, rep));
    }
    if (std::none_of(cfg_.conditions.begin(), cfg_.conditions.end(), is_student)) return;

    const auto student = stage("distill student (seed " + std::to_string(seed) + ")", [&] {
      StudentDataOptions opts;
      opts.teacher = teacher_settings;
      opts.keep_copy_fallbacks = cfg_.keep_copy_fallbacks;
      opts.workers = 1;
      const TransferComponents comp{*teacher, *sh_.classifier, *sh_.embedder};
      const auto records = build_student_data(comp, sh_.corpus, opts, mix(seed, 14));
      const auto pairs = to_rewrite_pairs(records);
      if (pairs.empty()) throw DataError("teacher produced no usable student pairs");
      return NeuralBackend::train_rewrite(sh_.vocab, pairs, cfg_.student, mix(seed, 15));
    });
    for (Condition c : cfg_.conditions) {
      if (!is_student(c)) continue;
      const std::size_t k = student_k(c);
      const auto outputs = stage("student transfer (" + tag(c, seed) + ")", [&] {
        std::vector<TokenSeq> outs;
        for (std::size_t i = 0; i < sh_.test.size(); ++i) {
          GenOptions gen;
          gen.temperature = cfg_.temperature;
          gen.max_len = cfg_.max_len;
          gen.seed = mix(mix(seed, 16), i);
          outs.push_back(student_transfer(student, *sh_.classifier, *sh_.embedder, sh_.test[i].source,
                                          sh_.test[i].target_label, k, gen, cfg_.policy)
                             .output);
        }
        return outs;
      });
      const auto rep = stage("evaluate (" + tag(c, seed) + ")", [&] { return score(sh_, outputs, cfg_); });
      out.rows.push_back(make_row(c, k, seed, rep));
    }
  }

  const Shared& sh_;
  const ExperimentConfig& cfg_;
};

}  // namespace

std::string to_string(Condition c) {
  switch (c) {
    case Condition::Hard: return "HARD";
    case Condition::Soft: return "SOFT";
    case Condition::NoControl: return "NO_CONTROL";
    case Condition::Teacher: return "TEACHER";
    case Condition::StudentK1: return "STUDENT_K1";
    case Condition::StudentK2: return "STUDENT_K2";
    case Condition::StudentK4: return "STUDENT_K4";
  }
  return "UNKNOWN";
}

Condition parse_condition(const std::string& name) {
  for (Condition c : kAllConditions)
    if (to_string(c) == name) return c;
  throw std::invalid_argument("unknown condition '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (train_path.empty()) throw std::invalid_argument("experiment needs a training corpus path");
  if (test_path.empty()) throw std::invalid_argument("experiment needs a test set path");
  if (k_list.empty()) throw std::invalid_argument("K list must be non-empty");
  if (std::find(k_list.begin(), k_list.end(), std::size_t{0}) != k_list.end())
    throw std::invalid_argument("K values must be at least 1");
  if (seeds.empty()) throw std::invalid_argument("seed list must be non-empty");
  if (conditions.empty()) throw std::invalid_argument("condition list must be non-empty");
  if (teacher_k == 0) throw std::invalid_argument("teacher K must be at least 1");
  if (variants_per_example == 0) throw std::invalid_argument("variants per example must be at least 1");
  if (backend == BackendKind::Bridge) throw std::invalid_argument("experiments run on the built-in backends");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  mask.validate();
  policy.validate();
  const bool soft = std::find(conditions.begin(), conditions.end(), Condition::Soft) != conditions.end() ||
                    (mask.mode == MaskMode::Soft &&
                     std::find(conditions.begin(), conditions.end(), Condition::NoControl) != conditions.end());
  if (soft && backend != BackendKind::Neural) throw std::invalid_argument("soft masking requires the neural backend");
  std::set<Condition> uniq(conditions.begin(), conditions.end());
  if (uniq.size() != conditions.size()) throw std::invalid_argument("conditions listed twice");
  std::set<std::uint64_t> useeds(seeds.begin(), seeds.end());
  if (useeds.size() != seeds.size()) throw std::invalid_argument("seeds listed twice");
}

nlohmann::json merge_config(nlohmann::json doc, const nlohmann::json& overrides) {
  if (!doc.is_object()) doc = nlohmann::json::object();
  for (const auto& [key, value] : overrides.items()) {
    if (value.is_object() && doc.contains(key) && doc[key].is_object())
      doc[key] = merge_config(doc[key], value);
    else
      doc[key] = value;
  }
  return doc;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  check_keys(doc,
             {"train", "test", "labels", "output_dir", "mask", "backend", "neural", "student", "variants_per_example",
              "control_source", "k_list", "teacher_k", "temperature", "max_len", "policy", "keep_copy_fallbacks",
              "seeds", "conditions", "g_mode", "semantic_mode", "nb_alpha", "lm_k", "workers"},
             "config");
  try {
    if (doc.contains("train")) c.train_path = resolve(doc["train"].get<std::string>(), base_dir);
    if (doc.contains("test")) c.test_path = resolve(doc["test"].get<std::string>(), base_dir);
    if (doc.contains("labels")) c.labels = doc["labels"].get<std::vector<std::string>>();
    if (doc.contains("output_dir")) c.output_dir = resolve(doc["output_dir"].get<std::string>(), base_dir);
    if (doc.contains("mask")) {
      const auto& m = doc["mask"];
      check_keys(m, {"ratio", "span_mean", "mode", "blend"}, "mask");
      if (m.contains("ratio")) c.mask.ratio = m["ratio"].get<double>();
      if (m.contains("span_mean")) c.mask.span_mean = m["span_mean"].get<double>();
      if (m.contains("blend")) c.mask.blend = m["blend"].get<double>();
      if (m.contains("mode")) {
        const auto mode = m["mode"].get<std::string>();
        if (mode != "hard" && mode != "soft") throw std::invalid_argument("mask mode must be hard or soft");
        c.mask.mode = mode == "hard" ? MaskMode::Hard : MaskMode::Soft;
      }
    }
    if (doc.contains("backend")) c.backend = parse_backend_kind(doc["backend"].get<std::string>());
    if (doc.contains("neural")) c.neural = parse_hyper(doc["neural"], c.neural, "neural");
    c.student = c.neural;
    if (doc.contains("student")) c.student = parse_hyper(doc["student"], c.student, "student");
    if (doc.contains("variants_per_example")) c.variants_per_example = doc["variants_per_example"].get<std::size_t>();
    if (doc.contains("control_source"))
      c.control_source = parse_control_source(doc["control_source"].get<std::string>());
    if (doc.contains("k_list")) c.k_list = doc["k_list"].get<std::vector<std::size_t>>();
    if (doc.contains("teacher_k")) c.teacher_k = doc["teacher_k"].get<std::size_t>();
    if (doc.contains("temperature")) c.temperature = doc["temperature"].get<double>();
    if (doc.contains("max_len")) c.max_len = doc["max_len"].get<std::size_t>();
    if (doc.contains("policy")) {
      const auto& p = doc["policy"];
      check_keys(p, {"threshold", "fallback", "similarity_floor"}, "policy");
      if (p.contains("threshold")) c.policy.threshold = p["threshold"].get<double>();
      if (p.contains("fallback")) {
        const auto f = p["fallback"].get<std::string>();
        if (f != "best-prob" && f != "copy-source") throw std::invalid_argument("fallback must be best-prob or copy-source");
        c.policy.fallback = f == "best-prob" ? Fallback::BestProb : Fallback::CopySource;
      }
      if (p.contains("similarity_floor") && !p["similarity_floor"].is_null())
        c.policy.similarity_floor = p["similarity_floor"].get<double>();
    }
    if (doc.contains("keep_copy_fallbacks")) c.keep_copy_fallbacks = doc["keep_copy_fallbacks"].get<bool>();
    if (doc.contains("seeds")) c.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("conditions")) {
      c.conditions.clear();
      for (const auto& name : doc["conditions"].get<std::vector<std::string>>())
        c.conditions.push_back(parse_condition(name));
    }
    if (doc.contains("g_mode")) c.g_mode = parse_g_mode(doc["g_mode"].get<std::string>());
    if (doc.contains("semantic_mode")) c.semantic_mode = parse_semantic_mode(doc["semantic_mode"].get<std::string>());
    if (doc.contains("nb_alpha")) c.nb_alpha = doc["nb_alpha"].get<double>();
    if (doc.contains("lm_k")) c.lm_k = doc["lm_k"].get<double>();
    if (doc.contains("workers")) c.workers = doc["workers"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json conds = nlohmann::json::array();
  for (auto c : conditions) conds.push_back(to_string(c));
  nlohmann::json policy_json = {{"threshold", policy.threshold},
                                {"fallback", policy.fallback == Fallback::BestProb ? "best-prob" : "copy-source"}};
  policy_json["similarity_floor"] = policy.similarity_floor ? nlohmann::json(*policy.similarity_floor) : nullptr;
  return {{"train", train_path.string()},
          {"test", test_path.string()},
          {"labels", labels},
          {"output_dir", output_dir.string()},
          {"mask",
           {{"ratio", mask.ratio},
            {"span_mean", mask.span_mean},
            {"mode", mask.mode == MaskMode::Hard ? "hard" : "soft"},
            {"blend", mask.blend}}},
          {"backend", to_string(backend)},
          {"neural", hyper_json(neural)},
          {"student", hyper_json(student)},
          {"variants_per_example", variants_per_example},
          {"control_source", control_source_name(control_source)},
          {"k_list", k_list},
          {"teacher_k", teacher_k},
          {"temperature", temperature},
          {"max_len", max_len},
          {"policy", policy_json},
          {"keep_copy_fallbacks", keep_copy_fallbacks},
          {"seeds", seeds},
          {"conditions", conds},
          {"g_mode", to_string(g_mode)},
          {"semantic_mode", to_string(semantic_mode)},
          {"nb_alpha", nb_alpha},
          {"lm_k", lm_k},
          {"workers", workers}};
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (!std::filesystem::exists(config.train_path))
    throw DataError("training corpus not found: " + config.train_path.string());
  if (!std::filesystem::exists(config.test_path)) throw DataError("test set not found: " + config.test_path.string());

  Shared sh;
  stage("load data", [&] {
    sh.labels = LabelSet(config.labels.empty() ? corpus_label_names(config.train_path) : config.labels);
    sh.corpus = read_corpus(config.train_path, sh.labels);
    sh.test = read_test_set(config.test_path, sh.labels);
    if (config.semantic_mode == SemanticMode::VsReference)
      for (const auto& t : sh.test)
        if (!t.reference) throw DataError("test item without reference (semantic mode vs-reference)");
  });
  stage("train classifier", [&] {
    sh.classifier = std::make_unique<NaiveBayesClassifier>(NaiveBayesClassifier::train(sh.corpus, sh.labels, config.nb_alpha));
  });
  stage("fit embedder", [&] { sh.embedder = std::make_unique<TfIdfEmbedder>(TfIdfEmbedder::fit(sh.corpus)); });
  stage("train language model", [&] {
    std::vector<TokenSeq> seqs;
    for (const auto& ex : sh.corpus) seqs.push_back(ex.seq);
    sh.lm = std::make_unique<NgramLM>(NgramLM::train(seqs, config.lm_k));
  });
  stage("build vocabulary", [&] { sh.vocab = std::make_shared<const Vocab>(Vocab::build(sh.corpus, sh.labels)); });

  auto has = [&](Condition c) {
    return std::find(config.conditions.begin(), config.conditions.end(), c) != config.conditions.end();
  };
  std::vector<Cell> cells;
  for (auto seed : config.seeds) {
    if (has(Condition::Hard)) cells.push_back({CellKind::Hard, seed});
    if (has(Condition::Soft)) cells.push_back({CellKind::Soft, seed});
    if (has(Condition::NoControl)) cells.push_back({CellKind::NoControl, seed});
    if (has(Condition::Teacher) || std::any_of(config.conditions.begin(), config.conditions.end(), is_student))
      cells.push_back({CellKind::Distill, seed});
  }

  const CellRunner runner(sh, config);
  std::vector<CellOutput> outputs(cells.size());
  parallel_for(cells.size(), config.workers, [&](std::size_t i) { outputs[i] = runner.run(cells[i]); });

  ExperimentResult result;
  for (auto& o : outputs) {
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
    result.pair_counts.insert(result.pair_counts.end(), o.pair_counts.begin(), o.pair_counts.end());
  }
  std::stable_sort(result.rows.begin(), result.rows.end(), [](const ExperimentRow& a, const ExperimentRow& b) {
    return std::tie(a.condition, a.k, a.seed) < std::tie(b.condition, b.k, b.seed);
  });
  return result;
}

std::string results_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "condition,K,seed,accuracy,semantic,g,s_bleu,fluency\n";
  for (const auto& r : result.rows)
    out << to_string(r.condition) << ',' << r.k << ',' << r.seed << ',' << fixed(r.accuracy) << ','
        << fixed(r.semantic) << ',' << fixed(r.g) << ',' << fixed(r.s_bleu) << ',' << fixed(r.fluency) << '\n';
  return out.str();
}

std::string summary_csv(const ExperimentResult& result) {
  struct Acc {
    std::size_t n = 0;
    double accuracy = 0, semantic = 0, g = 0, s_bleu = 0, fluency = 0;
  };
  std::map<std::pair<Condition, std::size_t>, Acc> groups;
  for (const auto& r : result.rows) {
    auto& a = groups[{r.condition, r.k}];
    ++a.n;
    a.accuracy += r.accuracy;
    a.semantic += r.semantic;
    a.g += r.g;
    a.s_bleu += r.s_bleu;
    a.fluency += r.fluency;
  }
  std::ostringstream out;
  out << "condition,K,seeds,accuracy,semantic,g,s_bleu,fluency\n";
  for (const auto& [key, a] : groups) {
    const double n = static_cast<double>(a.n);
    out << to_string(key.first) << ',' << key.second << ',' << a.n << ',' << fixed(a.accuracy / n) << ','
        << fixed(a.semantic / n) << ',' << fixed(a.g / n) << ',' << fixed(a.s_bleu / n) << ','
        << fixed(a.fluency / n) << '\n';
  }
  return out.str();
}

void write_experiment(const ExperimentConfig& config, const ExperimentResult& result) {
  std::filesystem::create_directories(config.output_dir);
  write_text_file(config.output_dir / "results.csv", results_csv(result));
  write_text_file(config.output_dir / "summary.csv", summary_csv(result));
  write_json_file(config.output_dir / "config.json", config.to_json());
}

}  // namespace restyle
