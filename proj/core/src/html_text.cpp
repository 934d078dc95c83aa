#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <regex>
#include <string>
#include <string_view>

#include "mmfc/webfc.hpp"

namespace mmfc {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x110000) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string decode_entities(std::string_view s) {
  static const std::map<std::string, unsigned long, std::less<>> kNamed = {
      {"amp", '&'},     {"lt", '<'},      {"gt", '>'},      {"quot", '"'},    {"apos", '\''},
      {"nbsp", ' '},    {"mdash", 0x2014}, {"ndash", 0x2013}, {"hellip", 0x2026}, {"rsquo", 0x2019},
      {"lsquo", 0x2018}, {"rdquo", 0x201D}, {"ldquo", 0x201C}, {"copy", 0xA9}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = (name.size() > 1 && (name[1] == 'x' || name[1] == 'X')) ? std::stoul(std::string(name.substr(2)), nullptr, 16)
                                                                      : std::stoul(std::string(name.substr(1)));
      } catch (const std::exception&) {
        out.push_back('&');
        continue;
      }
      append_utf8(out, cp == 0xA0 ? ' ' : cp);
      i = semi;
    } else if (auto it = kNamed.find(name); it != kNamed.end()) {
      append_utf8(out, it->second);
      i = semi;
    } else {
      out.push_back('&');
    }
  }
  return out;
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

// Drops comments and the contents of non-content elements.
std::string strip_blocks(std::string_view html) {
  static constexpr std::array<std::string_view, 11> kDrop = {"script", "style", "noscript", "nav",    "header", "footer",
                                                             "aside",  "form",  "svg",      "iframe", "template"};
  const auto low = lower(html);
  std::string out;
  out.reserve(html.size());
  std::size_t i = 0;
  while (i < html.size()) {
    if (low.compare(i, 4, "<!--") == 0) {
      const auto end = low.find("-->", i + 4);
      i = end == std::string::npos ? html.size() : end + 3;
      continue;
    }
    if (html[i] == '<') {
      bool dropped = false;
      for (auto tag : kDrop) {
        if (low.compare(i + 1, tag.size(), tag) == 0) {
          const char next = i + 1 + tag.size() < low.size() ? low[i + 1 + tag.size()] : '>';
          if (next != '>' && next != '/' && !std::isspace(static_cast<unsigned char>(next))) continue;
          const auto close = low.find("</" + std::string(tag), i + 1);
          if (close == std::string::npos) {
            i = html.size();
          } else {
            const auto gt = low.find('>', close);
            i = gt == std::string::npos ? html.size() : gt + 1;
          }
          out.push_back(' ');
          dropped = true;
          break;
        }
      }
      if (dropped) continue;
    }
    out.push_back(html[i]);
    ++i;
  }
  return out;
}

// Element content between the first <tag ...> and its closing tag.
std::optional<std::string> element_content(const std::string& html, std::string_view tag) {
  const auto low = lower(html);
  std::size_t pos = 0;
  while ((pos = low.find("<" + std::string(tag), pos)) != std::string::npos) {
    const char next = pos + 1 + tag.size() < low.size() ? low[pos + 1 + tag.size()] : '>';
    if (next == '>' || std::isspace(static_cast<unsigned char>(next))) break;
    ++pos;
  }
  if (pos == std::string::npos) return std::nullopt;
  const auto open_end = low.find('>', pos);
  if (open_end == std::string::npos) return std::nullopt;
  const auto close = low.rfind("</" + std::string(tag));
  const auto end = (close == std::string::npos || close < open_end) ? html.size() : close;
  return html.substr(open_end + 1, end - open_end - 1);
}

std::string strip_tags(std::string_view html) {
  std::string out;
  out.reserve(html.size());
  bool in_tag = false;
  for (char c : html) {
    if (c == '<') {
      in_tag = true;
      out.push_back(' ');
    } else if (c == '>') {
      in_tag = false;
    } else if (!in_tag) {
      out.push_back(c);
    }
  }
  return collapse_ws(decode_entities(out));
}

std::vector<std::string> paragraphs(const std::string& html) {
  const auto low = lower(html);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = low.find("<p", pos)) != std::string::npos) {
    const char next = pos + 2 < low.size() ? low[pos + 2] : '>';
    if (next != '>' && !std::isspace(static_cast<unsigned char>(next))) {
      pos += 2;
      continue;
    }
    const auto open_end = low.find('>', pos);
    if (open_end == std::string::npos) break;
    auto end = low.find("</p", open_end);
    const auto next_p = low.find("<p", open_end);
    if (end == std::string::npos || (next_p != std::string::npos && next_p < end)) {
      end = next_p == std::string::npos ? low.size() : next_p;
    }
    auto text = strip_tags(std::string_view(html).substr(open_end + 1, end - open_end - 1));
    if (!text.empty()) out.push_back(std::move(text));
    pos = end;
  }
  return out;
}

std::map<std::string, std::string> tag_attributes(std::string_view tag) {
  std::map<std::string, std::string> attrs;
  std::size_t i = 0;
  while (i < tag.size() && !std::isspace(static_cast<unsigned char>(tag[i]))) ++i;  // tag name
  while (i < tag.size()) {
    while (i < tag.size() && (std::isspace(static_cast<unsigned char>(tag[i])) || tag[i] == '/')) ++i;
    const auto key_start = i;
    while (i < tag.size() && tag[i] != '=' && !std::isspace(static_cast<unsigned char>(tag[i])) && tag[i] != '/') ++i;
    auto key = lower(tag.substr(key_start, i - key_start));
    while (i < tag.size() && std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
    std::string value;
    if (i < tag.size() && tag[i] == '=') {
      ++i;
      while (i < tag.size() && std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
      if (i < tag.size() && (tag[i] == '"' || tag[i] == '\'')) {
        const char q = tag[i++];
        const auto end = tag.find(q, i);
        value = std::string(tag.substr(i, end == std::string_view::npos ? std::string_view::npos : end - i));
        i = end == std::string_view::npos ? tag.size() : end + 1;
      } else {
        const auto start = i;
        while (i < tag.size() && !std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
        value = std::string(tag.substr(start, i - start));
      }
    }
    if (!key.empty()) attrs.emplace(std::move(key), decode_entities(value));
    if (key_start == i) ++i;
  }
  return attrs;
}

std::vector<std::map<std::string, std::string>> tags_named(std::string_view html, std::string_view name) {
  const auto low = lower(html);
  std::vector<std::map<std::string, std::string>> out;
  std::size_t pos = 0;
  const auto open = "<" + std::string(name);
  while ((pos = low.find(open, pos)) != std::string::npos) {
    const auto end = low.find('>', pos);
    if (end == std::string::npos) break;
    const char next = pos + open.size() < low.size() ? low[pos + open.size()] : '>';
    if (next == '>' || next == '/' || std::isspace(static_cast<unsigned char>(next))) {
      out.push_back(tag_attributes(html.substr(pos + 1, end - pos - 1)));
    }
    pos = end;
  }
  return out;
}

std::optional<Date> dateline(std::string_view text) {
  static const std::regex kIso(R"((\d{4})-(\d{2})-(\d{2}))");
  static const std::regex kLong(
      R"(\b(jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?\s+(\d{1,2}),?\s+(\d{4})\b)",
      std::regex::icase);
  const std::string s(text);
  std::optional<std::pair<std::ptrdiff_t, Date>> best;
  std::smatch m;
  for (auto it = s.cbegin(); std::regex_search(it, s.cend(), m, kIso); it = m[0].second) {
    if (auto d = parse_iso_date(m.str(0)); d) {
      best = {m.position(0) + (it - s.cbegin()), *d};
      break;
    }
  }
  for (auto it = s.cbegin(); std::regex_search(it, s.cend(), m, kLong); it = m[0].second) {
    static constexpr std::array<std::string_view, 12> kMonths = {"jan", "feb", "mar", "apr", "may", "jun",
                                                                 "jul", "aug", "sep", "oct", "nov", "dec"};
    const auto mon = lower(m.str(1)).substr(0, 3);
    const auto idx = std::find(kMonths.begin(), kMonths.end(), mon) - kMonths.begin();
    const Date d{std::chrono::year{std::stoi(m.str(3))}, std::chrono::month{static_cast<unsigned>(idx + 1)},
                 std::chrono::day{static_cast<unsigned>(std::stoi(m.str(2)))}};
    if (!d.ok()) continue;
    const auto at = m.position(0) + (it - s.cbegin());
    if (!best || at < best->first) best = {at, d};
    break;
  }
  if (best) return best->second;
  return std::nullopt;
}

}  // namespace

std::string extract_main_text(std::string_view html) {
  const auto cleaned = strip_blocks(html);
  std::string region = cleaned;
  for (auto tag : {"article", "main", "body"}) {
    if (auto content = element_content(cleaned, tag)) {
      region = std::move(*content);
      break;
    }
  }
  auto paras = paragraphs(region);
  if (paras.empty()) return strip_tags(region);
  std::string out;
  for (const auto& p : paras) {
    if (!out.empty()) out += "\n\n";
    out += p;
  }
  return out;
}

std::optional<Date> extract_publish_date(std::string_view html) {
  static constexpr std::array<std::string_view, 7> kMetaKeys = {
      "article:published_time", "datepublished", "og:published_time", "publish-date",
      "pubdate",                "date",          "dc.date"};
  const auto metas = tags_named(html, "meta");
  for (auto key : kMetaKeys) {
    for (const auto& attrs : metas) {
      for (auto attr : {"property", "name", "itemprop"}) {
        auto it = attrs.find(attr);
        if (it == attrs.end() || lower(it->second) != key) continue;
        auto content = attrs.find("content");
        if (content == attrs.end()) continue;
        if (auto d = parse_iso_date(content->second)) return d;
      }
    }
  }

  static const std::regex kJsonLd(R"re("datePublished"\s*:\s*"([^"]+)")re");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(html.begin(), html.end(), m, kJsonLd)) {
    if (auto d = parse_iso_date(m.str(1))) return d;
  }

  for (const auto& attrs : tags_named(html, "time")) {
    if (auto it = attrs.find("datetime"); it != attrs.end()) {
      if (auto d = parse_iso_date(it->second)) return d;
    }
  }

  return dateline(strip_tags(strip_blocks(html)));
}

}  // namespace mmfc
