#include "critfilt/toml_subset.hpp"

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "critfilt/error.hpp"

namespace critfilt {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (done()) break;
      if (peek() == '[') {
        ++pos_;
        skip_spaces();
        const auto path = key_path();
        skip_spaces();
        expect(']');
        table = &descend(root, path, true);
      } else {
        const auto path = key_path();
        skip_spaces();
        expect('=');
        skip_spaces();
        nlohmann::json* parent = path.size() > 1
                                     ? &descend(*table, {path.begin(), path.end() - 1}, false)
                                     : table;
        if (parent->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*parent)[path.back()] = value();
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  bool done() const { return pos_ >= text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_spaces() {
    while (!done() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!done() && peek() != '\n') ++pos_;
  }

  void skip_blank_lines() {
    while (true) {
      skip_spaces();
      skip_comment();
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() {
    while (true) {
      skip_spaces();
      skip_comment();
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (done()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    ++pos_;
    ++line_;
  }

  std::string bare_key() {
    const std::size_t start = pos_;
    while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> path{peek() == '"' ? basic_string() : bare_key()};
    while (true) {
      skip_spaces();
      if (peek() != '.') return path;
      ++pos_;
      skip_spaces();
      path.push_back(peek() == '"' ? basic_string() : bare_key());
    }
  }

  nlohmann::json& descend(nlohmann::json& root, const std::vector<std::string>& path, bool header) {
    nlohmann::json* node = &root;
    for (const auto& key : path) {
      if (!node->contains(key)) (*node)[key] = nlohmann::json::object();
      node = &(*node)[key];
      if (!node->is_object()) fail("'" + key + "' is not a table");
    }
    if (header) {
      const std::string joined = [&] {
        std::string s;
        for (const auto& k : path) s += (s.empty() ? "" : ".") + k;
        return s;
      }();
      for (const auto& seen : headers_)
        if (seen == joined) fail("duplicate section [" + joined + "]");
      headers_.push_back(joined);
    }
    return *node;
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (done() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (done()) fail("unterminated string");
      switch (text_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail("unsupported escape sequence");
      }
    }
  }

  std::string literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!done() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  nlohmann::json number_or_bool() {
    const std::size_t start = pos_;
    while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                       peek() == '-' || peek() == '_'))
      ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::erase(token, '_');
    if (token.empty()) fail("expected a value");
    const bool integral = token.find_first_of(".eE") == std::string::npos;
    const char* first = token.data() + (token[0] == '+' ? 1 : 0);
    const char* last = token.data() + token.size();
    if (integral) {
      long long v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && ptr == last) return v;
    } else {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && ptr == last) return v;
    }
    fail("cannot parse value '" + token + "'");
  }

  nlohmann::json array() {
    expect('[');
    nlohmann::json out = nlohmann::json::array();
    while (true) {
      skip_array_space();
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_array_space();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_array_space();
      expect(']');
      return out;
    }
  }

  nlohmann::json value() {
    switch (peek()) {
      case '"': return basic_string();
      case '\'': return literal_string();
      case '[': return array();
      case '{': fail("inline tables are not supported");
      default: return number_or_bool();
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::vector<std::string> headers_;
};

}  // namespace

nlohmann::json parse_toml_subset(std::string_view text) { return Parser(text).parse(); }

}  // namespace critfilt
