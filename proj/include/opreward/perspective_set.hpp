#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace opreward {

enum class Provenance { kOriginal, kAugmented };

struct Perspective {
  std::string name;
  std::string explanation;
  Provenance provenance = Provenance::kOriginal;

  friend bool operator==(const Perspective&, const Perspective&) = default;
};

// A prompt with its ordered perspectives (references or candidates).
struct PerspectiveSet {
  std::string row_id;
  std::string prompt;
  std::vector<Perspective> perspectives;

  std::size_t size() const { return perspectives.size(); }

  // Explanations with any "In the perspective of X, " prefix removed.
  std::vector<std::string> explanations() const;

  // Throws Error(kInvalidArgument) if two explanations are equal after
  // normalization.
  void validate_unique() const;

  friend bool operator==(const PerspectiveSet&, const PerspectiveSet&) = default;
};

// Dataset JSONL row:
// {"id", "prompt", "perspectives": [{"name", "explanation", "provenance"}]}
std::vector<PerspectiveSet> read_dataset_jsonl(std::istream& in, const std::string& source_name = "<stream>");
std::vector<PerspectiveSet> read_dataset_jsonl(const std::string& path);
void write_dataset_jsonl(std::ostream& out, const std::vector<PerspectiveSet>& rows);
std::string dataset_row_json(const PerspectiveSet& row);

}  // namespace opreward
