#include "opreward/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include "opreward/error.hpp"
#include "opreward/eval.hpp"
#include "opreward/json_io.hpp"
#include "opreward/llm_client.hpp"
#include "opreward/pipeline.hpp"
#include "opreward/service.hpp"

namespace opreward {

using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string store;
  std::string embed_url;
  std::optional<double> tau;
  std::optional<double> tau_dup;
  bool ladder = false;
  bool linear = false;
  std::optional<double> alpha_cov;
  std::optional<double> alpha_uniq;
  std::uint64_t seed = 0;
  std::string out;
  std::string bind = "127.0.0.1:8080";
  std::size_t workers = 4;
  std::string config;
  std::string transcript;
  std::string record;
  std::string llm_model = "default";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

RewardConfig resolve_config(const GlobalOptions& g) {
  RewardConfig cfg;
  if (!g.config.empty()) cfg = load_config_file(g.config, cfg);
  if (g.tau) cfg.tau_match = *g.tau;
  if (g.tau_dup) cfg.tau_dup = *g.tau_dup;
  if (g.ladder) cfg.ladder_mode = LadderMode::kLadder;
  if (g.linear) cfg.ladder_mode = LadderMode::kLinear;
  if (g.alpha_cov) cfg.alpha_cov = *g.alpha_cov;
  if (g.alpha_uniq) cfg.alpha_uniq = *g.alpha_uniq;
  cfg.validate();
  return cfg;
}

std::unique_ptr<EmbeddingProvider> make_provider(const GlobalOptions& g) {
  if (!g.store.empty()) return std::make_unique<LocalVectorStore>(LocalVectorStore::load(g.store));
  std::string url = g.embed_url.empty() ? env_or_empty("OP_EMBED_URL") : g.embed_url;
  if (url.empty()) throw UsageError("an embedding provider is required: pass --store or --embed-url (or set OP_EMBED_URL)");
  HttpEmbeddingProvider::Options options;
  options.url = url;
  return std::make_unique<HttpEmbeddingProvider>(options);
}

std::unique_ptr<LLMClient> make_judge(const GlobalOptions& g) {
  if (!g.transcript.empty()) return std::make_unique<ReplayLLMClient>(Transcript::load(g.transcript));
  const std::string url = env_or_empty("OP_LLM_URL");
  if (url.empty()) throw UsageError("a judge is required: pass --transcript or set OP_LLM_URL");
  HttpChatClient::Options options;
  options.url = url;
  options.model = g.llm_model;
  options.api_key = env_or_empty("OP_LLM_API_KEY");
  return std::make_unique<HttpChatClient>(options);
}

// Writes to --out when given, else to the default stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) fail(ErrorCode::kIo, "cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path);
  f << content;
}

// Accepts {"prompt", "references": [...]} or a dataset row
// {"id", "prompt", "perspectives": [...]}.
PerspectiveSet read_prompt_file(const std::string& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object() || !doc.contains("prompt") || !doc["prompt"].is_string()) {
    fail(ErrorCode::kParse, path + ": expected an object with a \"prompt\" string");
  }
  const char* key = doc.contains("references") ? "references" : "perspectives";
  if (!doc.contains(key) || !doc[key].is_array()) {
    fail(ErrorCode::kParse, path + ": expected a \"references\" array");
  }
  PerspectiveSet set;
  set.prompt = doc["prompt"].get<std::string>();
  if (doc.contains("id") && doc["id"].is_string()) set.row_id = doc["id"].get<std::string>();
  for (const json& r : doc[key]) {
    if (!r.is_object() || !r.contains("explanation") || !r["explanation"].is_string()) {
      fail(ErrorCode::kParse, path + ": each reference needs an \"explanation\" string");
    }
    set.perspectives.push_back({r.value("name", std::string()), r["explanation"].get<std::string>(),
                                Provenance::kOriginal});
  }
  return set;
}

// One response per line: a JSON string or {"response": "..."}.
std::vector<std::string> read_responses(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json v = json::parse(line);
      if (v.is_string()) {
        out.push_back(v.get<std::string>());
      } else if (v.is_object() && v.contains("response") && v["response"].is_string()) {
        out.push_back(v["response"].get<std::string>());
      } else {
        fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": expected a string or {\"response\"}");
      }
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PerspectiveSet> read_dataset(const std::string& path) { return read_dataset_jsonl(path); }

void write_transcript_if_requested(const GlobalOptions& g, const RecordingLLMClient* recorder) {
  if (!recorder || g.record.empty()) return;
  std::ostringstream ss;
  recorder->transcript().write(ss);
  write_text_file(g.record, ss.str());
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) throw UsageError("invalid --grid value \"" + item + "\"");
    grid.push_back(v);
  }
  return grid;
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const std::size_t colon = bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("--bind must be host:port");
  try {
    std::size_t pos = 0;
    const std::string port_text = bind.substr(colon + 1);
    const int port = std::stoi(port_text, &pos);
    if (pos != port_text.size() || port < 0 || port > 65535) throw std::out_of_range("port");
    return {bind.substr(0, colon), port};
  } catch (const std::exception&) {
    throw UsageError("--bind port must be an integer in [0, 65535]");
  }
}

int run_serve(const GlobalOptions& g, std::ostream& err) {
  const auto [host, port] = parse_bind(g.bind);
  auto provider = make_provider(g);
  provider->check_health();
  ServiceOptions options;
  options.base_config = resolve_config(g);
  options.workers = g.workers;
  ScoringService service(*provider, options);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int bound = service.bind(host, port);
  err << "listening on " << host << ":" << bound << " (" << provider->describe() << ")" << std::endl;

  std::atomic<bool> done{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (!done.load()) err << "shutting down" << std::endl;
    service.stop();
  });
  const bool ok = service.listen();
  done.store(true);
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pluralistic reward engine: scoring, matching, dataset refinement and evaluation", "opreward"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", engine_version());

  GlobalOptions g;
  app.add_option("--store", g.store, "Local vector store JSONL");
  app.add_option("--embed-url", g.embed_url, "Embedding service base URL (default: $OP_EMBED_URL)");
  app.add_option("--tau", g.tau, "Matching threshold")->check(CLI::Range(-1.0, 1.0));
  app.add_option("--tau-dup", g.tau_dup, "Uniqueness clustering threshold")->check(CLI::Range(-1.0, 1.0));
  auto* ladder = app.add_flag("--ladder", g.ladder, "Stepwise reward tables (default)");
  auto* linear = app.add_flag("--linear", g.linear, "Linear reward scaling");
  ladder->excludes(linear);
  app.add_option("--alpha-cov", g.alpha_cov, "Coverage cap")->check(CLI::NonNegativeNumber);
  app.add_option("--alpha-uniq", g.alpha_uniq, "Uniqueness cap")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--out", g.out, "Output path (default: stdout)");
  app.add_option("--bind", g.bind, "Service address host:port")->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--config", g.config, "RewardConfig JSON file");
  app.add_option("--transcript", g.transcript, "Replay judge answers from this transcript");
  app.add_option("--record", g.record, "Write the judge transcript here");
  app.add_option("--llm-model", g.llm_model, "Model name sent to $OP_LLM_URL")->capture_default_str();

  auto* score = app.add_subcommand("score", "Score responses against reference perspectives");
  std::string prompt_file, responses_file, request_file;
  score->add_option("--prompt-file", prompt_file, "JSON with prompt and references");
  score->add_option("--responses", responses_file, "JSONL of responses");
  score->add_option("--request", request_file, "Full score request JSON (prints a score response)");

  auto* match = app.add_subcommand("match", "Match a raw similarity matrix");
  std::string matrix_file, matcher_name_opt;
  match->add_option("--matrix", matrix_file, "JSON {\"scores\": [[...]], \"tau\", \"matcher\"}")->required();
  match->add_option("--matcher", matcher_name_opt, "mbgm or naive")->check(CLI::IsMember({"mbgm", "naive"}));

  auto* refine = app.add_subcommand("refine", "Deduplicate and augment a perspective dataset");
  std::string dataset_file, report_file;
  double stage1_threshold = kStage1Threshold;
  refine->add_option("--dataset", dataset_file, "Dataset JSONL")->required();
  refine->add_option("--report", report_file, "Per-row report JSONL");
  refine->add_option("--stage1-threshold", stage1_threshold, "Similarity filter")
      ->check(CLI::Range(-1.0, 1.0))
      ->capture_default_str();

  auto* triplets = app.add_subcommand("triplets", "Build anchor/positive/negative triplets");
  std::string trace_file;
  triplets->add_option("--dataset", dataset_file, "Dataset JSONL")->required();
  triplets->add_option("--trace", trace_file, "Judge trace JSONL");

  auto* eval = app.add_subcommand("eval-protocol", "Absolute-accuracy matcher evaluation");
  std::string cases_file;
  eval->add_option("--cases", cases_file, "Case JSONL")->required();
  eval->add_option("--matcher", matcher_name_opt, "mbgm or naive")->check(CLI::IsMember({"mbgm", "naive"}));

  auto* sweep = app.add_subcommand("sweep", "Evaluate over a threshold grid");
  std::string grid_text;
  sweep->add_option("--cases", cases_file, "Case JSONL")->required();
  sweep->add_option("--matcher", matcher_name_opt, "mbgm or naive")->check(CLI::IsMember({"mbgm", "naive"}));
  sweep->add_option("--grid", grid_text, "Comma-separated thresholds (default 0.65..0.80 step 0.01)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic evaluation suite and its vector store");
  std::string store_out;
  std::size_t per_subtask = 10;
  double unsolvable = 0.0;
  synth->add_option("--cases-out", cases_file, "Case JSONL to write")->required();
  synth->add_option("--store-out", store_out, "Vector store JSONL to write")->required();
  synth->add_option("--per-subtask", per_subtask, "Cases per subtask")->capture_default_str();
  synth->add_option("--unsolvable", unsolvable, "Fraction of planted unsolvable cases")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Run the HTTP scoring service");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  auto matcher = [&] {
    return matcher_name_opt.empty() ? Matcher::kMbgm : *parse_matcher(matcher_name_opt);
  };

  try {
    if (score->parsed()) {
      const bool request_mode = !request_file.empty();
      if (request_mode == (!prompt_file.empty() || !responses_file.empty()) ||
          (!request_mode && (prompt_file.empty() || responses_file.empty()))) {
        throw UsageError("score takes either --request, or both --prompt-file and --responses");
      }
      const RewardConfig cfg = resolve_config(g);
      auto provider = make_provider(g);
      if (request_mode) {
        const ScoreRequest request = parse_score_request(read_json_file(request_file));
        const ScoreResponse response = score_request(request, cfg, *provider, g.workers);
        Output o(g.out, out);
        o.stream() << to_json(response).dump() << '\n';
      } else {
        const PerspectiveSet refs = read_prompt_file(prompt_file);
        if (refs.perspectives.empty()) fail(ErrorCode::kEmptyInput, prompt_file + ": no references");
        const std::vector<std::string> responses = read_responses(responses_file);
        Output o(g.out, out);
        for (const std::string& r : responses) {
          o.stream() << to_json(score_response(refs.prompt, refs, r, cfg, *provider)).dump() << '\n';
        }
      }
    } else if (match->parsed()) {
      MatchRequest request = parse_match_request(read_json_file(matrix_file));
      if (g.tau) request.tau = *g.tau;
      if (!matcher_name_opt.empty()) request.matcher = matcher();
      Output o(g.out, out);
      o.stream() << match_response(request).dump() << '\n';
    } else if (refine->parsed()) {
      auto provider = make_provider(g);
      auto judge = make_judge(g);
      const std::vector<PerspectiveSet> rows = read_dataset(dataset_file);
      RecordingLLMClient recorder(*judge);
      RefineOptions options;
      options.stage1_threshold = stage1_threshold;
      options.judge.parallelism = g.workers;
      const RefineResult result = refine_dataset(rows, *provider, recorder, options);
      {
        Output o(g.out, out);
        write_dataset_jsonl(o.stream(), result.rows);
      }
      if (!report_file.empty()) {
        std::ostringstream ss;
        for (const RowReport& r : result.reports) {
          const double uniq = r.input_count == 0 ? 0.0
                                                 : static_cast<double>(r.input_count - r.removed) /
                                                       static_cast<double>(r.input_count);
          ss << json{{"id", r.row_id},          {"input_count", r.input_count}, {"flagged_pairs", r.flagged_pairs},
                     {"removed", r.removed},    {"added", r.added},             {"uniqueness_score", uniq},
                     {"outcome", row_outcome_name(r.outcome)}}
                    .dump()
             << '\n';
        }
        write_text_file(report_file, ss.str());
      }
      const RefineStats& s = result.stats;
      err << json{{"input_rows", s.input_rows},
                  {"kept", s.kept},
                  {"augmented", s.augmented},
                  {"dropped", s.dropped},
                  {"flagged_pairs", s.flagged_pairs},
                  {"duplicates_removed", s.duplicates_removed},
                  {"perspectives_added", s.perspectives_added}}
                 .dump()
          << '\n';
      write_transcript_if_requested(g, &recorder);
    } else if (triplets->parsed()) {
      auto provider = make_provider(g);
      auto judge = make_judge(g);
      const std::vector<PerspectiveSet> rows = read_dataset(dataset_file);
      RecordingLLMClient recorder(*judge);
      JudgeOptions options;
      options.parallelism = g.workers;
      std::vector<Triplet> all;
      std::ostringstream trace_out;
      for (const PerspectiveSet& row : rows) {
        std::vector<TripletTrace> trace;
        std::vector<Triplet> t = build_triplets(row, recorder, *provider, options, &trace);
        all.insert(all.end(), t.begin(), t.end());
        for (const TripletTrace& tr : trace) {
          json judged = json::array();
          for (const auto& [index, redundant] : tr.judged) judged.push_back({index, redundant});
          trace_out << json{{"row_id", row.row_id}, {"anchor", tr.anchor}, {"ranked", tr.ranked},
                            {"judged", judged},     {"emitted", tr.emitted}}
                           .dump()
                    << '\n';
        }
      }
      {
        Output o(g.out, out);
        write_triplets_jsonl(o.stream(), all);
      }
      if (!trace_file.empty()) write_text_file(trace_file, trace_out.str());
      write_transcript_if_requested(g, &recorder);
    } else if (eval->parsed()) {
      const RewardConfig cfg = resolve_config(g);
      const std::vector<ProtocolCase> cases = read_cases_jsonl(cases_file);
      auto provider = make_provider(g);
      EvalOptions options;
      options.masking = cfg.masking;
      const ProtocolReport report = run_protocol(cases, matcher(), cfg.tau_match, *provider, options);
      Output o(g.out, out);
      write_report_csv(o.stream(), report);
    } else if (sweep->parsed()) {
      const RewardConfig cfg = resolve_config(g);
      const std::vector<double> grid = grid_text.empty() ? default_tau_grid() : parse_grid(grid_text);
      const std::vector<ProtocolCase> cases = read_cases_jsonl(cases_file);
      auto provider = make_provider(g);
      EvalOptions options;
      options.masking = cfg.masking;
      const auto reports = threshold_sweep(cases, matcher(), grid, *provider, options);
      Output o(g.out, out);
      write_sweep_csv(o.stream(), reports);
    } else if (synth->parsed()) {
      SyntheticSuiteOptions options;
      options.seed = g.seed;
      options.cases_per_subtask = per_subtask;
      options.unsolvable_fraction = unsolvable;
      const SyntheticSuite suite = make_synthetic_suite(options);
      std::ostringstream cases_text, store_text;
      write_cases_jsonl(cases_text, suite.cases);
      suite.store.write_jsonl(store_text);
      write_text_file(cases_file, cases_text.str());
      write_text_file(store_out, store_text.str());
    } else if (serve->parsed()) {
      return run_serve(g, err);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RequestError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    err << "error (" << error_code_name(e.code()) << "): " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace opreward
