#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phame/core/error.hpp"
#include "phame/core/io.hpp"

namespace phame::chem {

struct CorpusEntry {
  std::string smiles;
  /// Optional tab-separated numeric columns (property, condition components).
  std::vector<double> columns;
  /// 1-based line number in the source file.
  int line = 0;
};

/// Molecule corpus: one SMILES per line, optional tab-separated numeric
/// columns, '#' comments and blank lines skipped.
inline std::vector<CorpusEntry> parse_corpus(std::string_view text) {
  std::vector<CorpusEntry> out;
  int lineno = 0;
  for (const auto& raw : io::lines(text)) {
    ++lineno;
    const std::string line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = io::split(line, '\t');
    CorpusEntry entry;
    entry.smiles = io::trim(fields[0]);
    entry.line = lineno;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto v = io::parse_real(fields[i]);
      if (!v) {
        throw Error(ErrorCode::Data, "corpus line " + std::to_string(lineno) + ": column " +
                                         std::to_string(i) + " is not numeric");
      }
      entry.columns.push_back(*v);
    }
    if (!out.empty() && out.front().columns.size() != entry.columns.size()) {
      throw Error(ErrorCode::Data, "corpus line " + std::to_string(lineno) + ": expected " +
                                       std::to_string(out.front().columns.size()) + " numeric columns");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

inline std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path) {
  return parse_corpus(io::read_file(path));
}

}  // namespace phame::chem
