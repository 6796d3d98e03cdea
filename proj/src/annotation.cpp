#include "vpsim/annotation.hpp"

#include <utility>

#include "vpsim/errors.hpp"

namespace vpsim {

namespace {

constexpr std::string_view kThoughtKeyword = "Thoughts:";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string_view trim_right(std::string_view s) {
  std::size_t e = s.size();
  while (e > 0 && is_space(s[e - 1])) --e;
  return s.substr(0, e);
}

std::string_view trim_left(std::string_view s) { return s.substr(skip_space(s, 0)); }

// Parses one `<...>` segment starting at `open` (which must point at '<').
// Returns the annotation and the index one past the closing '>'.
std::pair<Annotation, std::size_t> parse_segment(std::string_view s, std::size_t open) {
  const std::size_t body = open + 1;
  if (s.substr(body).starts_with(kThoughtKeyword)) {
    std::size_t k = skip_space(s, body + kThoughtKeyword.size());
    if (k < s.size() && s[k] == '"') {
      // Quoted payload may itself contain '>' or '<'; the block ends at a quote
      // followed (after optional spaces) by '>'.
      for (std::size_t q = s.find('"', k + 1); q != std::string_view::npos;
           q = s.find('"', q + 1)) {
        const std::size_t after = skip_space(s, q + 1);
        if (after < s.size() && s[after] == '>') {
          return {Annotation{Annotation::Kind::thought_block,
                             std::string(s.substr(k + 1, q - k - 1))},
                  after + 1};
        }
      }
      throw ParseError("unterminated thought block at offset " + std::to_string(open));
    }
    const std::size_t gt = s.find('>', k);
    if (gt == std::string_view::npos)
      throw ParseError("unterminated thought block at offset " + std::to_string(open));
    return {Annotation{Annotation::Kind::thought_block, std::string(trim(s.substr(k, gt - k)))},
            gt + 1};
  }

  std::size_t i = body;
  while (i < s.size() && s[i] != '>') {
    if (s[i] == '<' || s[i] == '\n')
      throw ParseError("unterminated annotation at offset " + std::to_string(open));
    ++i;
  }
  if (i == s.size()) throw ParseError("unterminated annotation at offset " + std::to_string(open));
  auto payload = trim(s.substr(body, i - body));
  if (payload.empty()) throw ParseError("empty annotation at offset " + std::to_string(open));
  return {Annotation{Annotation::Kind::emotion_tag, std::string(payload)}, i + 1};
}

}  // namespace

std::string AnnotatedContent::serialize() const {
  std::string out;
  for (const auto& a : annotations) {
    if (a.kind == Annotation::Kind::thought_block) {
      out += "<Thoughts: \"";
      out += a.payload;
      out += "\">";
    } else {
      out += '<';
      out += a.payload;
      out += '>';
    }
    out += ' ';
  }
  if (visible_text.empty() && !out.empty()) out.pop_back();
  out += visible_text;
  return out;
}

AnnotatedContent parse_annotations(std::string_view raw) {
  AnnotatedContent result;
  std::size_t i = skip_space(raw, 0);
  while (i < raw.size() && raw[i] == '<') {
    auto [annotation, end] = parse_segment(raw, i);
    result.annotations.push_back(std::move(annotation));
    i = skip_space(raw, end);
  }

  // Past the prefix '<' is literal, but a thought block is hidden wherever the
  // model puts it.
  const std::string_view rest = raw.substr(i);
  std::string visible;
  std::size_t pos = 0;
  for (std::size_t k = rest.find(kThoughtDelimiter); k != std::string_view::npos;
       k = rest.find(kThoughtDelimiter, pos)) {
    auto [annotation, end] = parse_segment(rest, k);
    result.annotations.push_back(std::move(annotation));
    visible += trim_right(rest.substr(pos, k - pos));
    pos = skip_space(rest, end);
    if (!visible.empty() && pos < rest.size()) visible += ' ';
  }
  visible += pos == 0 ? rest : trim_left(rest.substr(pos));
  result.visible_text = std::move(visible);
  return result;
}

std::string strip_for_display(std::string_view raw) {
  return parse_annotations(raw).visible_text;
}

}  // namespace vpsim
