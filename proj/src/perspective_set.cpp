#include "opreward/perspective_set.hpp"

#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>

#include "opreward/error.hpp"
#include "opreward/format.hpp"
#include "opreward/text.hpp"

namespace opreward {

using nlohmann::json;

std::vector<std::string> PerspectiveSet::explanations() const {
  std::vector<std::string> out;
  out.reserve(perspectives.size());
  for (const Perspective& p : perspectives) out.push_back(strip_perspective_prefix(p.explanation));
  return out;
}

void PerspectiveSet::validate_unique() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < perspectives.size(); ++i) {
    if (!seen.insert(text::comparison_key(strip_perspective_prefix(perspectives[i].explanation))).second) {
      fail(ErrorCode::kInvalidArgument,
           "row " + row_id + ": perspective " + std::to_string(i) + " repeats an earlier explanation");
    }
  }
}

namespace {

std::string required_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    fail(ErrorCode::kParse, where + ": field \"" + key + "\" must be a string");
  }
  return obj[key].get<std::string>();
}

}  // namespace

std::vector<PerspectiveSet> read_dataset_jsonl(std::istream& in, const std::string& source_name) {
  std::vector<PerspectiveSet> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
    if (!row.is_object()) fail(ErrorCode::kParse, where + ": expected an object");
    PerspectiveSet set;
    set.row_id = required_string(row, "id", where);
    set.prompt = required_string(row, "prompt", where);
    if (!row.contains("perspectives") || !row["perspectives"].is_array()) {
      fail(ErrorCode::kParse, where + ": field \"perspectives\" must be an array");
    }
    for (const json& p : row["perspectives"]) {
      if (!p.is_object()) fail(ErrorCode::kParse, where + ": perspectives must be objects");
      Perspective persp;
      persp.name = required_string(p, "name", where);
      persp.explanation = required_string(p, "explanation", where);
      if (p.contains("provenance")) {
        const std::string prov = required_string(p, "provenance", where);
        if (prov == "augmented") {
          persp.provenance = Provenance::kAugmented;
        } else if (prov != "original") {
          fail(ErrorCode::kParse, where + ": provenance must be \"original\" or \"augmented\"");
        }
      }
      set.perspectives.push_back(std::move(persp));
    }
    rows.push_back(std::move(set));
  }
  return rows;
}

std::vector<PerspectiveSet> read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open dataset " + path);
  return read_dataset_jsonl(in, path);
}

std::string dataset_row_json(const PerspectiveSet& row) {
  json perspectives = json::array();
  for (const Perspective& p : row.perspectives) {
    perspectives.push_back({{"name", p.name},
                            {"explanation", p.explanation},
                            {"provenance", p.provenance == Provenance::kAugmented ? "augmented" : "original"}});
  }
  json obj = {{"id", row.row_id}, {"prompt", row.prompt}, {"perspectives", std::move(perspectives)}};
  return obj.dump();
}

void write_dataset_jsonl(std::ostream& out, const std::vector<PerspectiveSet>& rows) {
  for (const PerspectiveSet& row : rows) out << dataset_row_json(row) << '\n';
}

}  // namespace opreward
