#pragma once

#include <string>

namespace vitaudit {

template <typename Fn>
void for_each_jsonl_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw CorpusError(path, 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    fn(j, line_no);
  }
}

}  // namespace vitaudit
