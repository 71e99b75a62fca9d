#pragma once

#include <algorithm>
#include <string>
#include <vector>

namespace thermadapt::detail {

// Plain aligned table. Leading `left_columns` columns are left-aligned, the
// rest right-aligned; a dashed rule separates header from body.
class TextTable {
 public:
  TextTable(std::vector<std::string> header, std::size_t left_columns)
      : header_(std::move(header)), left_(left_columns) {}

  void add_row(std::vector<std::string> row) {
    row.resize(header_.size());
    rows_.push_back(std::move(row));
  }

  void add_note(std::string note) { notes_.push_back(std::move(note)); }

  std::string str() const {
    std::vector<std::size_t> width(header_.size(), 0);
    auto measure = [&](const std::vector<std::string>& row) {
      for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
    };
    measure(header_);
    for (const auto& row : rows_) measure(row);

    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c != 0) out += "  ";
        const std::string pad(width[c] - display_width(row[c]), ' ');
        out += c < left_ ? row[c] + pad : pad + row[c];
      }
      while (!out.empty() && out.back() == ' ') out.pop_back();
      out += '\n';
    };
    emit(header_);
    std::size_t total = 0;
    for (std::size_t w : width) total += w;
    out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    for (const auto& row : rows_) emit(row);
    for (const auto& note : notes_) out += note + '\n';
    return out;
  }

 private:
  // UTF-8 aware enough for the em dash used in failed rows.
  static std::size_t display_width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
    return n;
  }

  std::vector<std::string> header_;
  std::size_t left_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> notes_;
};

}  // namespace thermadapt::detail
