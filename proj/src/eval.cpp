#include "opreward/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "opreward/error.hpp"
#include "opreward/json_io.hpp"
#include "opreward/parallel.hpp"
#include "opreward/text.hpp"

namespace opreward {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<MatchPair> run_matcher(const SimilarityMatrix& scores, Matcher matcher, double tau) {
  return matcher == Matcher::kMbgm ? mbgm(scores, tau).pairs : naive_match(scores, tau);
}

ProtocolReport assemble(const std::vector<ProtocolCase>& cases, std::vector<bool> verdicts,
                        std::vector<double> latencies) {
  ProtocolReport report;
  std::map<Subtask, double> latency_sum;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    SubtaskResult& r = report.per_subtask[cases[k].subtask];
    ++r.n_cases;
    if (verdicts[k]) ++r.n_correct;
    latency_sum[cases[k].subtask] += latencies[k];
  }
  double cp_sum = 0.0, rp_sum = 0.0;
  std::size_t cp_n = 0, rp_n = 0;
  for (auto& [subtask, r] : report.per_subtask) {
    r.accuracy = static_cast<double>(r.n_correct) / static_cast<double>(r.n_cases);
    r.mean_latency_s = latency_sum[subtask] / static_cast<double>(r.n_cases);
    if (is_candidate_subtask(subtask)) {
      cp_sum += r.accuracy;
      ++cp_n;
    } else {
      rp_sum += r.accuracy;
      ++rp_n;
    }
  }
  if (cp_n > 0) report.avg1 = cp_sum / static_cast<double>(cp_n);
  if (rp_n > 0) report.avg2 = rp_sum / static_cast<double>(rp_n);
  if (cp_n + rp_n > 0) report.total_avg = (cp_sum + rp_sum) / static_cast<double>(cp_n + rp_n);
  report.verdicts = std::move(verdicts);
  report.per_case_latency_s = std::move(latencies);
  return report;
}

void check_tau(double tau) {
  if (!(tau >= -1.0 && tau <= 1.0)) fail(ErrorCode::kInvalidArgument, "tau must be in [-1, 1]");
}

struct AggregateRow {
  std::string label;
  double accuracy;
  std::size_t n_cases;
  double mean_latency_s;
};

// Subtask rows followed by avg1, avg2 and total when defined. Aggregate rows
// count all cases they cover and average their latency per case.
std::vector<AggregateRow> report_rows(const ProtocolReport& report) {
  std::vector<AggregateRow> rows;
  std::size_t cp_cases = 0, rp_cases = 0;
  double cp_lat = 0.0, rp_lat = 0.0;
  for (const auto& [subtask, r] : report.per_subtask) {
    rows.push_back({std::string(subtask_name(subtask)), r.accuracy, r.n_cases, r.mean_latency_s});
    const double lat = r.mean_latency_s * static_cast<double>(r.n_cases);
    if (is_candidate_subtask(subtask)) {
      cp_cases += r.n_cases;
      cp_lat += lat;
    } else {
      rp_cases += r.n_cases;
      rp_lat += lat;
    }
  }
  auto mean = [](double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); };
  if (report.avg1) rows.push_back({"avg1", *report.avg1, cp_cases, mean(cp_lat, cp_cases)});
  if (report.avg2) rows.push_back({"avg2", *report.avg2, rp_cases, mean(rp_lat, rp_cases)});
  if (report.total_avg) {
    rows.push_back({"total", *report.total_avg, cp_cases + rp_cases, mean(cp_lat + rp_lat, cp_cases + rp_cases)});
  }
  return rows;
}

void write_row(std::ostream& out, const AggregateRow& row) {
  out << row.label << ',' << format_number(row.accuracy) << ',' << row.n_cases << ','
      << format_number(row.mean_latency_s) << '\n';
}

}  // namespace

std::string_view subtask_name(Subtask s) {
  switch (s) {
    case Subtask::kCp1: return "cp1";
    case Subtask::kCp2: return "cp2";
    case Subtask::kCp3: return "cp3";
    case Subtask::kCp4: return "cp4";
    case Subtask::kCp5: return "cp5";
    case Subtask::kRp3: return "rp3";
    case Subtask::kRp4: return "rp4";
    case Subtask::kRp5: return "rp5";
  }
  return "?";
}

std::optional<Subtask> parse_subtask(std::string_view name) {
  for (Subtask s : kAllSubtasks) {
    if (subtask_name(s) == name) return s;
  }
  return std::nullopt;
}

bool is_candidate_subtask(Subtask s) { return s <= Subtask::kCp5; }

std::size_t subtask_size(Subtask s) {
  switch (s) {
    case Subtask::kCp1: return 1;
    case Subtask::kCp2: return 2;
    case Subtask::kCp3: case Subtask::kRp3: return 3;
    case Subtask::kCp4: case Subtask::kRp4: return 4;
    case Subtask::kCp5: case Subtask::kRp5: return 5;
  }
  return 0;
}

void ProtocolCase::validate() const {
  const std::string where = "case" + (id.empty() ? std::string() : " " + id) + " (" +
                            std::string(subtask_name(subtask)) + "): ";
  const std::size_t k = subtask_size(subtask);
  if (candidates.size() != k) {
    fail(ErrorCode::kInvalidArgument, where + "expected " + std::to_string(k) + " candidates, got " +
                                          std::to_string(candidates.size()));
  }
  if (is_candidate_subtask(subtask)) {
    if (references.size() < k) fail(ErrorCode::kInvalidArgument, where + "fewer references than candidates");
    if (ground_truth.size() != k) fail(ErrorCode::kInvalidArgument, where + "every candidate needs a ground truth");
  } else {
    if (references.size() != 3) fail(ErrorCode::kInvalidArgument, where + "rp cases have exactly 3 references");
    if (ground_truth.size() != 3) fail(ErrorCode::kInvalidArgument, where + "rp cases map exactly 3 candidates");
  }
  std::set<std::size_t> used;
  for (const auto& [cand, ref] : ground_truth) {
    if (cand >= candidates.size() || ref >= references.size()) {
      fail(ErrorCode::kInvalidArgument, where + "ground truth index out of range");
    }
    if (!used.insert(ref).second) fail(ErrorCode::kInvalidArgument, where + "ground truth reuses a reference");
  }
  for (const std::string& s : references) {
    if (s.empty()) fail(ErrorCode::kInvalidArgument, where + "empty reference");
  }
  for (const std::string& s : candidates) {
    if (s.empty()) fail(ErrorCode::kInvalidArgument, where + "empty candidate");
  }
}

std::string_view matcher_name(Matcher m) { return m == Matcher::kMbgm ? "mbgm" : "naive"; }

std::optional<Matcher> parse_matcher(std::string_view name) {
  if (name == "mbgm") return Matcher::kMbgm;
  if (name == "naive") return Matcher::kNaive;
  return std::nullopt;
}

bool mapping_is_exact(const ProtocolCase& c, const std::vector<MatchPair>& pairs) {
  std::map<std::size_t, std::vector<std::size_t>> predicted;
  for (const MatchPair& p : pairs) predicted[p.candidate].push_back(p.reference);
  for (std::size_t i = 0; i < c.candidates.size(); ++i) {
    auto gt = c.ground_truth.find(i);
    auto pred = predicted.find(i);
    if (gt == c.ground_truth.end()) {
      if (pred != predicted.end()) return false;
    } else {
      if (pred == predicted.end() || pred->second.size() != 1 || pred->second[0] != gt->second) return false;
    }
  }
  return true;
}

bool evaluate_matrix(const ProtocolCase& c, const SimilarityMatrix& scores, Matcher matcher, double tau) {
  if (scores.rows() != c.candidates.size() || scores.cols() != c.references.size()) {
    fail(ErrorCode::kDimensionMismatch, "matrix shape does not match the case");
  }
  return mapping_is_exact(c, run_matcher(scores, matcher, tau));
}

SimilarityMatrix case_matrix(const ProtocolCase& c, const EmbeddingProvider& provider, const MaskingConfig& masking) {
  return similarity_matrix(c.candidates, c.references, c.question, masking, provider);
}

bool evaluate_case(const ProtocolCase& c, Matcher matcher, double tau, const EmbeddingProvider& provider,
                   const EvalOptions& options) {
  c.validate();
  check_tau(tau);
  return evaluate_matrix(c, case_matrix(c, provider, options.masking), matcher, tau);
}

ProtocolReport run_protocol(const std::vector<ProtocolCase>& cases, Matcher matcher, double tau,
                            const EmbeddingProvider& provider, const EvalOptions& options) {
  check_tau(tau);
  for (const ProtocolCase& c : cases) c.validate();
  std::vector<char> verdicts(cases.size(), 0);
  std::vector<double> latencies(cases.size(), 0.0);
  parallel_for(cases.size(), options.parallelism, [&](std::size_t k) {
    const auto start = Clock::now();
    verdicts[k] = evaluate_matrix(cases[k], case_matrix(cases[k], provider, options.masking), matcher, tau);
    latencies[k] = seconds_since(start);
  });
  return assemble(cases, std::vector<bool>(verdicts.begin(), verdicts.end()), std::move(latencies));
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  for (int i = 65; i <= 80; ++i) grid.push_back(i / 100.0);
  return grid;
}

std::map<double, ProtocolReport> threshold_sweep(const std::vector<ProtocolCase>& cases, Matcher matcher,
                                                 const std::vector<double>& tau_grid,
                                                 const EmbeddingProvider& provider, const EvalOptions& options) {
  std::map<double, ProtocolReport> out;
  if (tau_grid.empty()) return out;
  for (double tau : tau_grid) check_tau(tau);
  for (const ProtocolCase& c : cases) c.validate();
  std::vector<SimilarityMatrix> matrices(cases.size());
  std::vector<double> embed_latency(cases.size(), 0.0);
  parallel_for(cases.size(), options.parallelism, [&](std::size_t k) {
    const auto start = Clock::now();
    matrices[k] = case_matrix(cases[k], provider, options.masking);
    embed_latency[k] = seconds_since(start);
  });
  for (double tau : tau_grid) {
    std::vector<bool> verdicts(cases.size());
    std::vector<double> latencies(cases.size());
    for (std::size_t k = 0; k < cases.size(); ++k) {
      const auto start = Clock::now();
      verdicts[k] = evaluate_matrix(cases[k], matrices[k], matcher, tau);
      latencies[k] = embed_latency[k] + seconds_since(start);
    }
    out[tau] = assemble(cases, std::move(verdicts), std::move(latencies));
  }
  return out;
}

void write_report_csv(std::ostream& out, const ProtocolReport& report) {
  out << "subtask,accuracy,n_cases,mean_latency_s\n";
  for (const AggregateRow& row : report_rows(report)) write_row(out, row);
}

void write_sweep_csv(std::ostream& out, const std::map<double, ProtocolReport>& sweep) {
  out << "tau,subtask,accuracy,n_cases,mean_latency_s\n";
  for (const auto& [tau, report] : sweep) {
    for (const AggregateRow& row : report_rows(report)) {
      out << format_number(tau) << ',';
      write_row(out, row);
    }
  }
}

std::vector<ProtocolCase> read_cases_jsonl(std::istream& in, const std::string& source_name) {
  std::vector<ProtocolCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    ProtocolCase c;
    try {
      const json row = json::parse(line);
      if (row.contains("id")) c.id = row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump();
      c.question = row.at("question").get<std::string>();
      c.references = row.at("references").get<std::vector<std::string>>();
      c.candidates = row.at("candidates").get<std::vector<std::string>>();
      for (const auto& [key, value] : row.at("ground_truth").items()) {
        std::size_t pos = 0;
        const unsigned long cand = std::stoul(key, &pos);
        if (pos != key.size() || !value.is_number_unsigned()) {
          fail(ErrorCode::kParse, where + ": ground_truth maps index strings to reference indices");
        }
        c.ground_truth[cand] = value.get<std::size_t>();
      }
      const std::string subtask = row.at("subtask").get<std::string>();
      auto parsed = parse_subtask(subtask);
      if (!parsed) fail(ErrorCode::kParse, where + ": unknown subtask \"" + subtask + "\"");
      c.subtask = *parsed;
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    } catch (const std::logic_error& e) {
      fail(ErrorCode::kParse, where + ": ground_truth keys must be candidate indices");
    }
    try {
      c.validate();
    } catch (const Error& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

std::vector<ProtocolCase> read_cases_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open case file " + path);
  return read_cases_jsonl(in, path);
}

void write_cases_jsonl(std::ostream& out, const std::vector<ProtocolCase>& cases) {
  for (const ProtocolCase& c : cases) {
    json gt = json::object();
    for (const auto& [cand, ref] : c.ground_truth) gt[std::to_string(cand)] = ref;
    json row = {{"question", c.question},   {"references", c.references},
                {"candidates", c.candidates}, {"ground_truth", gt},
                {"subtask", std::string(subtask_name(c.subtask))}};
    if (!c.id.empty()) row["id"] = c.id;
    out << row.dump() << '\n';
  }
}

SyntheticSuite make_synthetic_suite(const SyntheticSuiteOptions& options) {
  constexpr std::size_t kDim = 10;  // up to 5 reference axes + 5 noise axes
  SyntheticSuite suite;
  std::mt19937_64 rng(options.seed);

  auto unit = [](std::size_t axis) {
    std::vector<double> v(kDim, 0.0);
    v[axis] = 1.0;
    return v;
  };
  auto lean = [](std::size_t ref_axis, std::size_t noise_axis, double s) {
    std::vector<double> v(kDim, 0.0);
    v[ref_axis] = s;
    v[noise_axis] = std::sqrt(1.0 - s * s);
    return v;
  };

  std::size_t case_no = 0;
  for (Subtask subtask : kAllSubtasks) {
    const std::size_t n = options.cases_per_subtask;
    const auto unsolvable_n = static_cast<std::size_t>(std::llround(options.unsolvable_fraction * n));
    std::vector<bool> unsolvable(n, false);
    std::fill(unsolvable.begin(), unsolvable.begin() + static_cast<std::ptrdiff_t>(std::min(unsolvable_n, n)), true);
    std::shuffle(unsolvable.begin(), unsolvable.end(), rng);

    for (std::size_t k = 0; k < n; ++k, ++case_no) {
      const std::string tag = "q" + std::to_string(case_no);
      ProtocolCase c;
      c.id = tag;
      c.subtask = subtask;
      c.question = "synthetic question " + tag;
      const std::size_t cands = subtask_size(subtask);
      const bool cp = is_candidate_subtask(subtask);
      const std::size_t refs = cp ? 5 : 3;
      const std::size_t mapped = cp ? cands : 3;

      std::vector<std::size_t> ref_order(refs);
      std::iota(ref_order.begin(), ref_order.end(), 0);
      std::shuffle(ref_order.begin(), ref_order.end(), rng);
      std::vector<std::size_t> cand_order(cands);
      std::iota(cand_order.begin(), cand_order.end(), 0);
      std::shuffle(cand_order.begin(), cand_order.end(), rng);

      // Reference axis a is stored at position ref_order[a]; logical candidate
      // b at position cand_order[b]. Logical candidate b < mapped paraphrases
      // axis b; the rest are distractors leaning towards axis (b - mapped).
      c.references.resize(refs);
      for (std::size_t a = 0; a < refs; ++a) {
        std::string text = "reference " + tag + "-r" + std::to_string(a);
        suite.store.insert(text, unit(a));
        c.references[ref_order[a]] = std::move(text);
      }
      c.candidates.resize(cands);
      for (std::size_t b = 0; b < cands; ++b) {
        const std::size_t noise = 5 + b;
        double s = options.correct_sim;
        std::size_t axis = b;
        if (b >= mapped) {
          axis = b - mapped;
          s = options.distractor_sim;
        }
        if (unsolvable[k]) {
          if (cands == mapped) {
            if (b == 0) s = options.weak_paraphrase_sim;
          } else {
            if (b == 0) s = options.dominated_correct_sim;
            if (b == mapped) s = options.dominant_distractor_sim;
          }
        }
        std::string text = "candidate " + tag + "-c" + std::to_string(b);
        suite.store.insert(text, lean(axis, noise, s));
        c.candidates[cand_order[b]] = std::move(text);
        if (b < mapped) c.ground_truth[cand_order[b]] = ref_order[b];
      }
      c.validate();
      suite.cases.push_back(std::move(c));
      suite.solvable.push_back(!unsolvable[k]);
    }
  }
  return suite;
}

}  // namespace opreward
