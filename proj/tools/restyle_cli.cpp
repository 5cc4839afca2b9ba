// restyle: command-line front end.
//
// Every subcommand that trains, transfers or scores reads an experiment
// config (--config, else $RESTYLE_CONFIG, else defaults) and overlays the
// mirrored flags on it. Exit codes: 0 ok, 1 usage, 2 data, 3 backend.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "restyle/backend.hpp"
#include "restyle/bridge.hpp"
#include "restyle/classifier.hpp"
#include "restyle/corpus_io.hpp"
#include "restyle/count_backend.hpp"
#include "restyle/embedder.hpp"
#include "restyle/error.hpp"
#include "restyle/experiment.hpp"
#include "restyle/metrics.hpp"
#include "restyle/neural_backend.hpp"
#include "restyle/persistence.hpp"
#include "restyle/pipeline.hpp"
#include "restyle/rng.hpp"
#include "restyle/toy_corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace restyle;

namespace {

constexpr const char* kConfigEnv = "RESTYLE_CONFIG";

/// Flag values keyed by the config key they mirror.
struct Overrides {
  std::string config_path;
  json values = json::object();

  void set(const std::string& pointer, json v) { values[json::json_pointer(pointer)] = std::move(v); }

  ExperimentConfig resolve() const {
    std::string path = config_path;
    if (path.empty())
      if (const char* env = std::getenv(kConfigEnv)) path = env;
    json base = json::object();
    fs::path base_dir = fs::current_path();
    if (!path.empty()) {
      base = read_json_file(path);
      base_dir = fs::absolute(path).parent_path();
    }
    return ExperimentConfig::from_json(merge_config(base, values), base_dir);
  }
};

template <class T>
void mirror(CLI::App* app, Overrides& o, const std::string& flag, const std::string& pointer, const std::string& help) {
  app->add_option_function<T>(flag, [&o, pointer](const T& v) { o.set(pointer, v); }, help + " [" + pointer + "]");
}

template <class T>
void mirror_list(CLI::App* app, Overrides& o, const std::string& flag, const std::string& pointer,
                 const std::string& help) {
  app->add_option_function<std::vector<T>>(flag, [&o, pointer](const std::vector<T>& v) { o.set(pointer, v); },
                                           help + " [" + pointer + "]")
      ->delimiter(',');
}

void mirror_path(CLI::App* app, Overrides& o, const std::string& flag, const std::string& pointer,
                 const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&o, pointer](const std::string& v) { o.set(pointer, fs::absolute(v).string()); },
      help + " [" + pointer + "]");
}

void add_config_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, std::string("Experiment config JSON (default $") + kConfigEnv + ")");
  mirror_list<std::string>(app, o, "--labels", "/labels", "Attribute labels");
  mirror<double>(app, o, "--mask-ratio", "/mask/ratio", "Fraction of tokens to mask");
  mirror<double>(app, o, "--span-mean", "/mask/span_mean", "Mean masked span length");
  mirror<std::string>(app, o, "--mask-mode", "/mask/mode", "hard or soft");
  mirror<double>(app, o, "--blend", "/mask/blend", "Soft mask blend weight");
  mirror<std::string>(app, o, "--backend", "/backend", "count or neural");
  mirror<std::size_t>(app, o, "--dim", "/neural/dim", "Neural embedding size");
  mirror<std::size_t>(app, o, "--window", "/neural/window", "Neural context radius");
  mirror<double>(app, o, "--lr", "/neural/learning_rate", "Neural learning rate");
  mirror<std::size_t>(app, o, "--epochs", "/neural/epochs", "Neural epochs");
  mirror<std::size_t>(app, o, "--max-steps", "/neural/max_steps", "Neural step cap (0 = none)");
  mirror<std::size_t>(app, o, "--student-epochs", "/student/epochs", "Student epochs");
  mirror<double>(app, o, "--student-lr", "/student/learning_rate", "Student learning rate");
  mirror<std::size_t>(app, o, "--variants", "/variants_per_example", "Masked variants per training sentence");
  mirror<std::string>(app, o, "--control-source", "/control_source", "classifier, gold or constant");
  mirror_list<std::size_t>(app, o, "--k", "/k_list", "Samples per input");
  mirror<std::size_t>(app, o, "--teacher-k", "/teacher_k", "Teacher samples per input");
  mirror<double>(app, o, "--temperature", "/temperature", "Sampling temperature");
  mirror<std::size_t>(app, o, "--max-len", "/max_len", "Longest generated span");
  mirror<double>(app, o, "--threshold", "/policy/threshold", "Target probability threshold");
  mirror<std::string>(app, o, "--fallback", "/policy/fallback", "best-prob or copy-source");
  mirror<double>(app, o, "--similarity-floor", "/policy/similarity_floor", "Minimum similarity to pass");
  mirror<bool>(app, o, "--keep-copy-fallbacks", "/keep_copy_fallbacks", "Keep copied sources as student data");
  mirror_list<std::uint64_t>(app, o, "--seeds", "/seeds", "Seeds (single runs use the first)");
  mirror_list<std::string>(app, o, "--conditions", "/conditions", "Experiment conditions");
  mirror<std::string>(app, o, "--g-mode", "/g_mode", "corpus or per-example");
  mirror<std::string>(app, o, "--semantic-mode", "/semantic_mode", "vs-reference or vs-source");
  mirror<double>(app, o, "--nb-alpha", "/nb_alpha", "Classifier smoothing");
  mirror<double>(app, o, "--lm-k", "/lm_k", "Language model add-k");
  mirror<int>(app, o, "--workers", "/workers", "Worker threads (0 = OpenMP default)");
  mirror_path(app, o, "--train", "/train", "Training corpus JSONL");
  mirror_path(app, o, "--test", "/test", "Test set JSONL");
  mirror_path(app, o, "--output-dir", "/output_dir", "Experiment output directory");
}

LabelSet corpus_labels(const ExperimentConfig& cfg, const fs::path& corpus) {
  return LabelSet(cfg.labels.empty() ? corpus_label_names(corpus) : cfg.labels);
}

fs::path need(const fs::path& given, const fs::path& fallback, const std::string& what) {
  if (!given.empty()) return given;
  if (!fallback.empty()) return fallback;
  throw std::invalid_argument(what + " is required");
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::istringstream in(cmd);
  std::vector<std::string> argv;
  for (std::string w; in >> w;) argv.push_back(w);
  if (argv.empty()) throw std::invalid_argument("empty bridge command");
  return argv;
}

TransferSettings transfer_settings(const ExperimentConfig& cfg, std::size_t k) {
  TransferSettings s;
  s.k = k;
  s.mask = cfg.mask;
  s.gen.temperature = cfg.temperature;
  s.gen.max_len = cfg.max_len;
  s.policy = cfg.policy;
  return s;
}

void emit_jsonl(const std::string& path, const std::vector<json>& lines) {
  if (path.empty() || path == "-") {
    for (const auto& l : lines) std::cout << l.dump() << "\n";
  } else {
    write_jsonl(path, lines);
  }
}

int cmd_gen_corpus(const std::string& spec_path, std::optional<std::uint64_t> seed, const std::string& train_out,
                   const std::string& test_out) {
  auto spec = spec_path.empty() ? ToyCorpusSpec::standard() : ToyCorpusSpec::from_json(read_json_file(spec_path));
  if (seed) spec.seed = *seed;
  const auto toy = gen_toy_corpus(spec);
  std::vector<json> train, test;
  for (const auto& ex : toy.train) train.push_back(corpus_line(ex));
  for (const auto& t : toy.test) test.push_back(test_line(t, spec.labels()));
  write_jsonl(train_out, train);
  write_jsonl(test_out, test);
  std::cerr << "wrote " << train.size() << " training and " << test.size() << " test lines\n";
  return 0;
}

int cmd_build_data(const Overrides& o, const std::string& corpus_arg, const std::string& classifier_path,
                   const std::string& out) {
  const auto cfg = o.resolve();
  const auto cls = NaiveBayesClassifier::from_json(read_json_file(classifier_path));
  const auto corpus = read_corpus(need(corpus_arg, cfg.train_path, "--corpus"), cls.labels());
  const auto pairs = build_denoising_data(corpus, cls, cfg.mask, cfg.variants_per_example, cfg.seeds.front(),
                                          cfg.control_source);
  std::vector<json> lines;
  for (const auto& p : pairs) {
    const TokenSeq hard = p.variant.kind == MaskMode::Hard
                              ? p.variant.hard_tokens
                              : mask_at(p.source(), p.variant.masked_positions, MaskMode::Hard, 1.0).hard_tokens;
    json line = {{"control", control_token(cls.labels(), p.control)},
                 {"input", detokenize(hard)},
                 {"output", detokenize(p.source())},
                 {"masked_positions", p.variant.masked_positions}};
    if (p.variant.kind == MaskMode::Soft) line["blend"] = cfg.mask.blend;
    lines.push_back(std::move(line));
  }
  emit_jsonl(out, lines);
  return 0;
}

int cmd_train(const Overrides& o, const std::string& what, const std::string& corpus_arg,
              const std::string& classifier_path, const std::string& out) {
  const auto cfg = o.resolve();
  const fs::path corpus_path = need(corpus_arg, cfg.train_path, "--corpus");
  if (what == "classifier") {
    const auto labels = corpus_labels(cfg, corpus_path);
    write_json_file(out, NaiveBayesClassifier::train(read_corpus(corpus_path, labels), labels, cfg.nb_alpha).to_json());
  } else if (what == "embedder") {
    const auto labels = corpus_labels(cfg, corpus_path);
    write_json_file(out, TfIdfEmbedder::fit(read_corpus(corpus_path, labels)).to_json());
  } else if (what == "lm") {
    const auto labels = corpus_labels(cfg, corpus_path);
    std::vector<TokenSeq> seqs;
    for (const auto& ex : read_corpus(corpus_path, labels)) seqs.push_back(ex.seq);
    write_json_file(out, NgramLM::train(seqs, cfg.lm_k).to_json());
  } else {
    if (classifier_path.empty()) throw std::invalid_argument("train backend needs --classifier");
    const auto cls = NaiveBayesClassifier::from_json(read_json_file(classifier_path));
    const auto corpus = read_corpus(corpus_path, cls.labels());
    const auto vocab = std::make_shared<const Vocab>(Vocab::build(corpus, cls.labels()));
    MaskSpec spec = cfg.mask;
    const auto seed = cfg.seeds.front();
    const auto pairs = build_denoising_data(corpus, cls, spec, cfg.variants_per_example, mix(seed, 11),
                                            cfg.control_source);
    BackendHyper hyper;
    hyper.neural = cfg.neural;
    write_json_file(out, backend_to_json(*backend_train(cfg.backend, vocab, pairs, hyper, mix(seed, 12))));
  }
  std::cerr << "wrote " << out << "\n";
  return 0;
}

/// Classifier, similarity model and generator for transfer and distill,
/// from model files or an external bridge.
struct Models {
  std::shared_ptr<BridgeClient> bridge;
  std::unique_ptr<AttributeClassifier> classifier;
  std::unique_ptr<SimilarityModel> similarity;
  std::unique_ptr<InfillBackend> backend;
  std::unique_ptr<NeuralBackend> student;

  const LabelSet& labels() const { return classifier->labels(); }
};

struct ModelPaths {
  std::string classifier, embedder, backend, student, bridge, labels;
  int timeout_ms = 30000;
};

Models load_models(const ModelPaths& p) {
  Models m;
  if (!p.bridge.empty())
    m.bridge = std::make_shared<BridgeClient>(split_command(p.bridge), std::chrono::milliseconds(p.timeout_ms));
  if (!p.classifier.empty()) {
    m.classifier = std::make_unique<NaiveBayesClassifier>(NaiveBayesClassifier::from_json(read_json_file(p.classifier)));
  } else if (m.bridge && m.bridge->has_role("classifier")) {
    if (p.labels.empty()) throw std::invalid_argument("a bridge classifier needs --bridge-labels");
    std::vector<std::string> names;
    std::stringstream ss(p.labels);
    for (std::string n; std::getline(ss, n, ',');) names.push_back(n);
    m.classifier = std::make_unique<BridgeClassifier>(m.bridge, LabelSet(names));
  } else {
    throw std::invalid_argument("--classifier is required");
  }
  if (!p.embedder.empty())
    m.similarity = std::make_unique<TfIdfEmbedder>(TfIdfEmbedder::from_json(read_json_file(p.embedder)));
  else if (m.bridge && m.bridge->has_role("embedder"))
    m.similarity = std::make_unique<BridgeEmbedder>(m.bridge);
  else
    throw std::invalid_argument("--embedder is required");

  const int sources = !p.backend.empty() + !p.student.empty() + !!m.bridge;
  if (sources != 1) throw std::invalid_argument("give exactly one of --model, --student or --bridge");
  if (!p.backend.empty()) m.backend = backend_from_json(read_json_file(p.backend));
  if (!p.student.empty()) {
    m.student = std::make_unique<NeuralBackend>(NeuralBackend::from_json(read_json_file(p.student)));
    if (m.student->mode() != NeuralMode::Rewrite) throw std::invalid_argument("--student needs a distilled model");
  }
  if (m.bridge) m.backend = std::make_unique<BridgeBackend>(m.bridge, m.labels());
  return m;
}

int cmd_transfer(const Overrides& o, const ModelPaths& paths, const std::string& text, const std::string& target,
                 const std::string& input, const std::string& output) {
  const auto cfg = o.resolve();
  const auto m = load_models(paths);
  const std::size_t k = *std::max_element(cfg.k_list.begin(), cfg.k_list.end());
  const auto seed = cfg.seeds.front();

  std::vector<TestItem> items;
  if (!text.empty()) {
    if (!input.empty()) throw std::invalid_argument("give either --text or --input");
    if (target.empty()) throw std::invalid_argument("--text needs --target");
    TestItem item;
    item.source = tokenize(text);
    item.target_label = m.labels().index_of(target);
    items.push_back(std::move(item));
  } else {
    items = read_test_set(need(input, cfg.test_path, "--text or --input"), m.labels());
  }

  std::vector<TransferResult> results;
  if (m.student) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      GenOptions gen;
      gen.temperature = cfg.temperature;
      gen.max_len = cfg.max_len;
      gen.seed = mix(mix(seed, 16), i);
      results.push_back(student_transfer(*m.student, *m.classifier, *m.similarity, items[i].source,
                                         items[i].target_label, k, gen, cfg.policy));
    }
  } else {
    const auto settings = transfer_settings(cfg, k);
    std::vector<TransferRequest> requests;
    for (std::size_t i = 0; i < items.size(); ++i)
      requests.push_back(make_request(items[i].source, items[i].source_label, items[i].target_label, settings,
                                      mix(seed, 13), i));
    results = transfer_batch({*m.backend, *m.classifier, *m.similarity}, requests, cfg.workers);
  }

  if (!text.empty() && output.empty()) {
    std::cout << detokenize(results[0].output) << "\n";
    return 0;
  }
  std::vector<json> lines;
  for (std::size_t i = 0; i < items.size(); ++i) lines.push_back(transfer_line(items[i], results[i], m.labels()));
  emit_jsonl(output, lines);
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& input, const std::string& classifier_path,
             const std::string& embedder_path, const std::string& lm_path, const std::string& report_path,
             const std::string& rows_path) {
  const auto cfg = o.resolve();
  const auto cls = NaiveBayesClassifier::from_json(read_json_file(classifier_path));
  const auto emb = TfIdfEmbedder::from_json(read_json_file(embedder_path));
  const auto lm = NgramLM::from_json(read_json_file(lm_path));
  const auto records = read_eval_records(input, cls.labels());
  const auto report = evaluate(records, cls, emb, lm, cfg.g_mode, cfg.semantic_mode, cfg.workers);
  const auto doc = report_json(report, cfg.semantic_mode);
  if (!report_path.empty()) write_json_file(report_path, doc);
  if (!rows_path.empty()) write_text_file(rows_path, report_csv(report, records, cls.labels()));
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_distill(const Overrides& o, const ModelPaths& paths, const std::string& corpus_arg, const std::string& out,
                const std::string& records_out) {
  const auto cfg = o.resolve();
  const auto m = load_models(paths);
  if (!m.backend || m.student) throw std::invalid_argument("distill needs a teacher via --model or --bridge");
  const auto corpus = read_corpus(need(corpus_arg, cfg.train_path, "--corpus"), m.labels());
  const auto seed = cfg.seeds.front();
  StudentDataOptions opts;
  opts.teacher = transfer_settings(cfg, cfg.teacher_k);
  opts.keep_copy_fallbacks = cfg.keep_copy_fallbacks;
  opts.workers = cfg.workers;
  const auto records = build_student_data({*m.backend, *m.classifier, *m.similarity}, corpus, opts, mix(seed, 14));
  if (!records_out.empty()) {
    std::vector<json> lines;
    for (const auto& r : records) lines.push_back(teacher_line(r, m.labels()));
    write_jsonl(records_out, lines);
  }
  std::size_t skipped = 0;
  const auto pairs = to_rewrite_pairs(records, &skipped);
  if (pairs.empty()) throw DataError("teacher produced no usable student pairs");
  const auto vocab = std::make_shared<const Vocab>(Vocab::build(corpus, m.labels()));
  write_json_file(out, NeuralBackend::train_rewrite(vocab, pairs, cfg.student, mix(seed, 15)).to_json());
  std::cerr << "distilled " << pairs.size() << " pairs (" << skipped << " skipped) into " << out << "\n";
  return 0;
}

int cmd_experiment(const Overrides& o) {
  const auto cfg = o.resolve();
  const auto result = run_experiment(cfg);
  write_experiment(cfg, result);
  std::cout << summary_csv(result);
  std::cerr << "wrote " << (cfg.output_dir / "results.csv").string() << "\n";
  return 0;
}

int cmd_bridge_check(const std::vector<std::string>& command, const std::vector<std::string>& labels, int timeout_ms) {
  if (command.empty()) throw std::invalid_argument("bridge-check needs the backend command");
  BridgeClient client(command, std::chrono::milliseconds(timeout_ms));
  bool all = true;
  for (const auto& c : run_conformance(client, LabelSet(labels))) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    all = all && c.passed;
  }
  return all ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute transfer by controlled span denoising"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-corpus", "Write the synthetic template corpus");
  std::string spec_path, train_out, test_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--spec", spec_path, "Toy corpus spec JSON");
  gen->add_option("--seed", gen_seed, "Override the corpus seed");
  gen->add_option("--train-out", train_out, "Training corpus JSONL")->required();
  gen->add_option("--test-out", test_out, "Test set JSONL")->required();

  Overrides data_o, train_o, transfer_o, eval_o, distill_o, exp_o;

  auto* data = app.add_subcommand("build-data", "Write masked denoising pairs");
  add_config_flags(data, data_o);
  std::string data_corpus, data_cls, data_out;
  data->add_option("--corpus", data_corpus, "Corpus JSONL (default: config train)");
  data->add_option("--classifier", data_cls, "Classifier model")->required();
  data->add_option("--out", data_out, "Pairs JSONL (default stdout)");

  auto* train = app.add_subcommand("train", "Train a model");
  add_config_flags(train, train_o);
  std::string what, train_corpus, train_cls, train_out_path;
  train->add_option("what", what, "classifier, embedder, lm or backend")
      ->required()
      ->check(CLI::IsMember({"classifier", "embedder", "lm", "backend"}));
  train->add_option("--corpus", train_corpus, "Corpus JSONL (default: config train)");
  train->add_option("--classifier", train_cls, "Classifier model (backend only)");
  train->add_option("--out", train_out_path, "Model file")->required();

  auto add_model_flags = [](CLI::App* sub, ModelPaths& p) {
    sub->add_option("--classifier", p.classifier, "Classifier model");
    sub->add_option("--embedder", p.embedder, "Embedder model");
    sub->add_option("--model", p.backend, "Infilling backend model");
    sub->add_option("--bridge", p.bridge, "External backend command line");
    sub->add_option("--bridge-labels", p.labels, "Labels of a bridge classifier, comma separated");
    sub->add_option("--bridge-timeout-ms", p.timeout_ms, "Bridge request timeout");
  };

  auto* transfer = app.add_subcommand("transfer", "Transfer one sentence or a test set");
  add_config_flags(transfer, transfer_o);
  ModelPaths transfer_paths;
  add_model_flags(transfer, transfer_paths);
  transfer->add_option("--student", transfer_paths.student, "Distilled student model");
  std::string text, target, transfer_in, transfer_out;
  transfer->add_option("--text", text, "Single input sentence");
  transfer->add_option("--target", target, "Target label for --text");
  transfer->add_option("--input", transfer_in, "Test set JSONL (default: config test)");
  transfer->add_option("--output", transfer_out, "Output JSONL (default stdout)");

  auto* eval = app.add_subcommand("eval", "Score transfer outputs");
  add_config_flags(eval, eval_o);
  std::string eval_in, eval_cls, eval_emb, eval_lm, report_path, rows_path;
  eval->add_option("--input", eval_in, "Transfer output JSONL")->required();
  eval->add_option("--classifier", eval_cls, "Classifier model")->required();
  eval->add_option("--embedder", eval_emb, "Embedder model")->required();
  eval->add_option("--lm", eval_lm, "Language model")->required();
  eval->add_option("--report", report_path, "Report JSON");
  eval->add_option("--rows", rows_path, "Per-record CSV");

  auto* distill = app.add_subcommand("distill", "Distill a rewrite student from a teacher");
  add_config_flags(distill, distill_o);
  ModelPaths distill_paths;
  add_model_flags(distill, distill_paths);
  std::string distill_corpus, distill_out, records_out;
  distill->add_option("--corpus", distill_corpus, "Corpus JSONL (default: config train)");
  distill->add_option("--out", distill_out, "Student model file")->required();
  distill->add_option("--records", records_out, "Teacher output JSONL");

  auto* exp = app.add_subcommand("experiment", "Run a full experiment grid");
  add_config_flags(exp, exp_o);

  auto* check = app.add_subcommand("bridge-check", "Protocol conformance against an external backend");
  std::vector<std::string> command, check_labels = {"neg", "pos"};
  int check_timeout = 30000;
  check->add_option("--labels", check_labels, "Labels for control tokens")->delimiter(',');
  check->add_option("--timeout-ms", check_timeout, "Request timeout");
  check->add_option("command", command, "Backend command line (after --)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_corpus(spec_path, gen_seed, train_out, test_out);
    if (*data) return cmd_build_data(data_o, data_corpus, data_cls, data_out);
    if (*train) return cmd_train(train_o, what, train_corpus, train_cls, train_out_path);
    if (*transfer) return cmd_transfer(transfer_o, transfer_paths, text, target, transfer_in, transfer_out);
    if (*eval) return cmd_eval(eval_o, eval_in, eval_cls, eval_emb, eval_lm, report_path, rows_path);
    if (*distill) return cmd_distill(distill_o, distill_paths, distill_corpus, distill_out, records_out);
    if (*exp) return cmd_experiment(exp_o);
    if (*check) return cmd_bridge_check(command, check_labels, check_timeout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
