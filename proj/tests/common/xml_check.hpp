#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace thermocad::testing {

/// Minimal well-formedness check: balanced and properly nested tags,
/// quoted attributes, known entities. Returns an empty string when the
/// document passes, otherwise a description of the first problem.
inline std::string xml_problem(std::string_view doc) {
  std::vector<std::string> stack;
  bool saw_root = false;
  std::size_t i = 0;
  auto name_at = [&](std::size_t& k) {
    const std::size_t start = k;
    while (k < doc.size() && (std::isalnum(static_cast<unsigned char>(doc[k])) || doc[k] == '-' || doc[k] == '_' ||
                              doc[k] == ':' || doc[k] == '.'))
      ++k;
    return std::string(doc.substr(start, k - start));
  };
  auto skip_space = [&](std::size_t& k) {
    while (k < doc.size() && std::isspace(static_cast<unsigned char>(doc[k]))) ++k;
  };
  auto check_entities = [](std::string_view text) -> bool {
    for (std::size_t k = 0; k < text.size(); ++k) {
      if (text[k] == '<') return false;
      if (text[k] != '&') continue;
      const std::size_t end = text.find(';', k);
      if (end == std::string_view::npos) return false;
      const std::string_view ent = text.substr(k + 1, end - k - 1);
      if (ent != "amp" && ent != "lt" && ent != "gt" && ent != "quot" && ent != "apos" &&
          !(ent.size() > 1 && ent[0] == '#'))
        return false;
    }
    return true;
  };

  while (i < doc.size()) {
    if (doc[i] != '<') {
      const std::size_t next = doc.find('<', i);
      const std::string_view text = doc.substr(i, next == std::string_view::npos ? std::string_view::npos : next - i);
      if (!check_entities(text)) return "bad character data near offset " + std::to_string(i);
      if (stack.empty() && text.find_first_not_of(" \t\r\n") != std::string_view::npos)
        return "text outside the root element";
      if (next == std::string_view::npos) break;
      i = next;
      continue;
    }
    if (doc.substr(i, 2) == "<?") {
      const std::size_t end = doc.find("?>", i);
      if (end == std::string_view::npos) return "unterminated declaration";
      i = end + 2;
      continue;
    }
    if (doc.substr(i, 4) == "<!--") {
      const std::size_t end = doc.find("-->", i);
      if (end == std::string_view::npos) return "unterminated comment";
      i = end + 3;
      continue;
    }
    if (doc.substr(i, 2) == "</") {
      std::size_t k = i + 2;
      const std::string name = name_at(k);
      skip_space(k);
      if (k >= doc.size() || doc[k] != '>') return "malformed closing tag " + name;
      if (stack.empty() || stack.back() != name) return "mismatched closing tag " + name;
      stack.pop_back();
      i = k + 1;
      continue;
    }
    std::size_t k = i + 1;
    const std::string name = name_at(k);
    if (name.empty()) return "empty tag name at offset " + std::to_string(i);
    if (stack.empty() && saw_root) return "second root element " + name;
    saw_root = true;
    for (;;) {
      skip_space(k);
      if (k >= doc.size()) return "unterminated tag " + name;
      if (doc[k] == '>') {
        stack.push_back(name);
        ++k;
        break;
      }
      if (doc.substr(k, 2) == "/>") {
        k += 2;
        break;
      }
      const std::string attr = name_at(k);
      if (attr.empty()) return "bad attribute in " + name;
      skip_space(k);
      if (k >= doc.size() || doc[k] != '=') return "attribute without value in " + name;
      ++k;
      skip_space(k);
      if (k >= doc.size() || (doc[k] != '"' && doc[k] != '\'')) return "unquoted attribute in " + name;
      const char quote = doc[k];
      const std::size_t end = doc.find(quote, k + 1);
      if (end == std::string_view::npos) return "unterminated attribute in " + name;
      if (!check_entities(doc.substr(k + 1, end - k - 1))) return "bad attribute value in " + name;
      k = end + 1;
    }
    i = k;
  }
  if (!stack.empty()) return "unclosed element " + stack.back();
  if (!saw_root) return "no root element";
  return {};
}

}  // namespace thermocad::testing
