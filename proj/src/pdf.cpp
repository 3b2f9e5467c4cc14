#include "resrag/pdf.hpp"

#include "resrag/corpus.hpp"

#include <openssl/rand.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <thread>
#include <unordered_map>

namespace resrag {

namespace {

// ---------------------------------------------------------------------------
// Object model

struct Obj
{
  enum class Type
  {
    Null,
    Bool,
    Number,
    String,
    Name,
    Array,
    Dict,
    Ref,
    Keyword,
  };
  Type type = Type::Null;
  double num = 0;
  bool boolean = false;
  std::string str; // String bytes, Name, Keyword
  std::vector<Obj> arr;
  std::vector<std::pair<std::string, Obj>> dict;
  int ref_num = 0;
  int ref_gen = 0;

  bool is(Type t) const { return type == t; }
  Obj const *get(std::string_view key) const
  {
    if (type != Type::Dict) { return nullptr; }
    for (auto const &[k, v] : dict) {
      if (k == key) { return &v; }
    }
    return nullptr;
  }
  bool name_is(std::string_view n) const { return type == Type::Name && str == n; }
};

bool is_ws(unsigned char c) { return c == 0 || c == 9 || c == 10 || c == 12 || c == 13 || c == 32; }
bool is_delim(unsigned char c)
{
  return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' || c == '/' ||
         c == '%';
}
bool is_regular(unsigned char c) { return !is_ws(c) && !is_delim(c); }

int hex_val(unsigned char c)
{
  if (c >= '0' && c <= '9') { return c - '0'; }
  if (c >= 'a' && c <= 'f') { return c - 'a' + 10; }
  if (c >= 'A' && c <= 'F') { return c - 'A' + 10; }
  return -1;
}

struct ParseFailure
{
};

class Lexer
{
public:
  explicit Lexer(std::string_view data, std::size_t pos = 0)
    : d_(data)
    , pos_(pos)
  {
  }

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  bool eof()
  {
    skip_ws();
    return pos_ >= d_.size();
  }

  void skip_ws()
  {
    while (pos_ < d_.size()) {
      auto const c = static_cast<unsigned char>(d_[pos_]);
      if (is_ws(c)) {
        ++pos_;
      } else if (c == '%') {
        while (pos_ < d_.size() && d_[pos_] != '\n' && d_[pos_] != '\r') { ++pos_; }
      } else {
        break;
      }
    }
  }

  /// Parses one object; integers followed by `gen R` become references.
  Obj parse(int depth = 0)
  {
    if (depth > 64) { throw ParseFailure{}; }
    skip_ws();
    if (pos_ >= d_.size()) { throw ParseFailure{}; }
    auto const c = static_cast<unsigned char>(d_[pos_]);
    if (c == '/') { return name(); }
    if (c == '(') { return literal(); }
    if (c == '<') {
      if (peek(1) == '<') { return dictionary(depth); }
      return hex();
    }
    if (c == '[') {
      ++pos_;
      Obj a;
      a.type = Obj::Type::Array;
      for (;;) {
        skip_ws();
        if (pos_ >= d_.size()) { throw ParseFailure{}; }
        if (d_[pos_] == ']') {
          ++pos_;
          return a;
        }
        a.arr.push_back(parse(depth + 1));
      }
    }
    if (c == '+' || c == '-' || c == '.' || (c >= '0' && c <= '9')) { return number_or_ref(); }
    if (c == ')' || c == '>' || c == ']' || c == '{' || c == '}') {
      ++pos_;
      Obj k;
      k.type = Obj::Type::Keyword;
      k.str = std::string(1, static_cast<char>(c));
      return k;
    }
    auto const start = pos_;
    while (pos_ < d_.size() && is_regular(static_cast<unsigned char>(d_[pos_]))) { ++pos_; }
    std::string word(d_.substr(start, pos_ - start));
    Obj o;
    if (word == "true" || word == "false") {
      o.type = Obj::Type::Bool;
      o.boolean = word == "true";
    } else if (word == "null") {
      o.type = Obj::Type::Null;
    } else {
      o.type = Obj::Type::Keyword;
      o.str = std::move(word);
    }
    return o;
  }

private:
  int peek(std::size_t off) const
  {
    return pos_ + off < d_.size() ? static_cast<unsigned char>(d_[pos_ + off]) : -1;
  }

  Obj name()
  {
    ++pos_;
    Obj o;
    o.type = Obj::Type::Name;
    while (pos_ < d_.size() && is_regular(static_cast<unsigned char>(d_[pos_]))) {
      char ch = d_[pos_++];
      if (ch == '#' && pos_ + 1 < d_.size()) {
        int const hi = hex_val(static_cast<unsigned char>(d_[pos_]));
        int const lo = hex_val(static_cast<unsigned char>(d_[pos_ + 1]));
        if (hi >= 0 && lo >= 0) {
          ch = static_cast<char>(hi * 16 + lo);
          pos_ += 2;
        }
      }
      o.str.push_back(ch);
    }
    return o;
  }

  Obj literal()
  {
    ++pos_;
    Obj o;
    o.type = Obj::Type::String;
    int depth = 1;
    while (pos_ < d_.size()) {
      char ch = d_[pos_++];
      if (ch == '\\') {
        if (pos_ >= d_.size()) { break; }
        char e = d_[pos_++];
        switch (e) {
        case 'n': o.str.push_back('\n'); break;
        case 'r': o.str.push_back('\r'); break;
        case 't': o.str.push_back('\t'); break;
        case 'b': o.str.push_back('\b'); break;
        case 'f': o.str.push_back('\f'); break;
        case '\r':
          if (pos_ < d_.size() && d_[pos_] == '\n') { ++pos_; }
          break;
        case '\n': break;
        default:
          if (e >= '0' && e <= '7') {
            int v = e - '0';
            for (int k = 0; k < 2 && pos_ < d_.size() && d_[pos_] >= '0' && d_[pos_] <= '7'; ++k) {
              v = v * 8 + (d_[pos_++] - '0');
            }
            o.str.push_back(static_cast<char>(v & 0xFF));
          } else {
            o.str.push_back(e);
          }
        }
      } else if (ch == '(') {
        ++depth;
        o.str.push_back(ch);
      } else if (ch == ')') {
        if (--depth == 0) { return o; }
        o.str.push_back(ch);
      } else {
        o.str.push_back(ch);
      }
    }
    throw ParseFailure{};
  }

  Obj hex()
  {
    ++pos_;
    Obj o;
    o.type = Obj::Type::String;
    int hi = -1;
    while (pos_ < d_.size() && d_[pos_] != '>') {
      int const v = hex_val(static_cast<unsigned char>(d_[pos_++]));
      if (v < 0) { continue; }
      if (hi < 0) {
        hi = v;
      } else {
        o.str.push_back(static_cast<char>(hi * 16 + v));
        hi = -1;
      }
    }
    if (pos_ >= d_.size()) { throw ParseFailure{}; }
    ++pos_;
    if (hi >= 0) { o.str.push_back(static_cast<char>(hi * 16)); }
    return o;
  }

  Obj dictionary(int depth)
  {
    pos_ += 2;
    Obj o;
    o.type = Obj::Type::Dict;
    for (;;) {
      skip_ws();
      if (pos_ + 1 < d_.size() && d_[pos_] == '>' && d_[pos_ + 1] == '>') {
        pos_ += 2;
        return o;
      }
      if (pos_ >= d_.size()) { throw ParseFailure{}; }
      Obj key = parse(depth + 1);
      if (!key.is(Obj::Type::Name)) { throw ParseFailure{}; }
      Obj value = parse(depth + 1);
      o.dict.emplace_back(std::move(key.str), std::move(value));
    }
  }

  Obj number_or_ref()
  {
    auto read_num = [&](double &out, bool &integral) {
      auto const start = pos_;
      if (pos_ < d_.size() && (d_[pos_] == '+' || d_[pos_] == '-')) { ++pos_; }
      integral = true;
      while (pos_ < d_.size() && ((d_[pos_] >= '0' && d_[pos_] <= '9') || d_[pos_] == '.')) {
        if (d_[pos_] == '.') { integral = false; }
        ++pos_;
      }
      std::string const s(d_.substr(start, pos_ - start));
      if (s.empty() || s == "+" || s == "-" || s == ".") { return false; }
      out = std::strtod(s.c_str(), nullptr);
      return true;
    };
    Obj o;
    o.type = Obj::Type::Number;
    bool integral = false;
    if (!read_num(o.num, integral)) { throw ParseFailure{}; }
    if (!integral || o.num < 0) { return o; }
    auto const save = pos_;
    skip_ws();
    double gen = 0;
    bool gen_integral = false;
    if (pos_ < d_.size() && d_[pos_] >= '0' && d_[pos_] <= '9' && read_num(gen, gen_integral) && gen_integral) {
      skip_ws();
      if (pos_ < d_.size() && d_[pos_] == 'R' &&
          (pos_ + 1 >= d_.size() || !is_regular(static_cast<unsigned char>(d_[pos_ + 1])))) {
        ++pos_;
        Obj r;
        r.type = Obj::Type::Ref;
        r.ref_num = static_cast<int>(o.num);
        r.ref_gen = static_cast<int>(gen);
        return r;
      }
    }
    pos_ = save;
    return o;
  }

  std::string_view d_;
  std::size_t pos_;
};

// ---------------------------------------------------------------------------
// Stream filters

std::optional<std::string> inflate(std::string_view in)
{
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) { return std::nullopt; }
  std::string out;
  char buf[16384];
  zs.next_in = reinterpret_cast<Bytef *>(const_cast<char *>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef *>(buf);
    zs.avail_out = sizeof buf;
    rc = ::inflate(&zs, Z_NO_FLUSH);
    out.append(buf, sizeof buf - zs.avail_out);
  } while (rc == Z_OK && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  // Truncated deflate data still yields usable text; only a total failure is fatal.
  if (rc != Z_STREAM_END && out.empty()) { return std::nullopt; }
  return out;
}

std::string ascii_hex(std::string_view in)
{
  std::string out;
  int hi = -1;
  for (char ch : in) {
    if (ch == '>') { break; }
    int const v = hex_val(static_cast<unsigned char>(ch));
    if (v < 0) { continue; }
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<char>(hi * 16 + v));
      hi = -1;
    }
  }
  if (hi >= 0) { out.push_back(static_cast<char>(hi * 16)); }
  return out;
}

std::string ascii85(std::string_view in)
{
  std::string out;
  std::uint32_t tuple = 0;
  int count = 0;
  auto flush = [&](int n) {
    for (int k = 0; k < n; ++k) { out.push_back(static_cast<char>((tuple >> (24 - 8 * k)) & 0xFF)); }
  };
  if (in.starts_with("<~")) { in.remove_prefix(2); }
  for (char ch : in) {
    if (ch == '~') { break; }
    if (is_ws(static_cast<unsigned char>(ch))) { continue; }
    if (ch == 'z' && count == 0) {
      out.append(4, '\0');
      continue;
    }
    if (ch < '!' || ch > 'u') { continue; }
    tuple = tuple * 85 + static_cast<std::uint32_t>(ch - '!');
    if (++count == 5) {
      flush(4);
      tuple = 0;
      count = 0;
    }
  }
  if (count > 1) {
    for (int k = count; k < 5; ++k) { tuple = tuple * 85 + 84; }
    flush(count - 1);
  }
  return out;
}

std::string png_unpredict(std::string const &in, int columns, int colors, int bpc)
{
  int const bpp = std::max(1, colors * bpc / 8);
  std::size_t const row = static_cast<std::size_t>((columns * colors * bpc + 7) / 8);
  std::string out;
  std::string prev(row, '\0');
  for (std::size_t off = 0; off + row + 1 <= in.size(); off += row + 1) {
    int const type = static_cast<unsigned char>(in[off]);
    std::string cur = in.substr(off + 1, row);
    for (std::size_t i = 0; i < row; ++i) {
      int const a = i >= static_cast<std::size_t>(bpp) ? static_cast<unsigned char>(cur[i - bpp]) : 0;
      int const b = static_cast<unsigned char>(prev[i]);
      int const c = i >= static_cast<std::size_t>(bpp) ? static_cast<unsigned char>(prev[i - bpp]) : 0;
      int x = static_cast<unsigned char>(cur[i]);
      switch (type) {
      case 1: x += a; break;
      case 2: x += b; break;
      case 3: x += (a + b) / 2; break;
      case 4: {
        int const p = a + b - c;
        int const pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
        x += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
        break;
      }
      default: break;
      }
      cur[i] = static_cast<char>(x & 0xFF);
    }
    out += cur;
    prev = std::move(cur);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Document

struct Stream
{
  std::size_t begin = 0;
  std::size_t length = 0;
};

struct Entry
{
  Obj obj;
  std::optional<Stream> stream;
  std::optional<std::string> decoded; // objects from object streams carry no stream
};

class Document
{
public:
  explicit Document(std::string_view data)
    : d_(data)
  {
    if (d_.substr(0, std::min<std::size_t>(d_.size(), 1024)).find("%PDF-") == std::string_view::npos) {
      throw UnparsablePdfError("missing %PDF header");
    }
    scan_objects();
    if (objects_.empty()) { throw UnparsablePdfError("no PDF objects found"); }
    read_trailers();
    expand_object_streams();
  }

  Obj const *resolve(Obj const *o, int depth = 0) const
  {
    while (o && o->is(Obj::Type::Ref) && depth++ < 32) {
      auto it = objects_.find(o->ref_num);
      if (it == objects_.end()) { return nullptr; }
      o = &it->second.obj;
    }
    return o;
  }

  Obj const *lookup(Obj const *dict, std::string_view key) const
  {
    dict = resolve(dict);
    return dict ? resolve(dict->get(key)) : nullptr;
  }

  /// Decoded stream content of the object `ref` points to.
  std::optional<std::string> stream_of(Obj const *ref) const
  {
    if (!ref || !ref->is(Obj::Type::Ref)) { return std::nullopt; }
    auto it = objects_.find(ref->ref_num);
    if (it == objects_.end()) { return std::nullopt; }
    return decode(it->second);
  }

  std::vector<Obj const *> pages() const
  {
    std::vector<Obj const *> out;
    if (Obj const *root = resolve(&root_)) {
      std::set<Obj const *> seen;
      collect_pages(lookup(root, "Pages"), out, seen, 0);
    }
    if (out.empty()) {
      for (auto const &[num, e] : objects_) {
        if (auto const *t = e.obj.get("Type"); t && t->name_is("Page")) { out.push_back(&e.obj); }
      }
    }
    return out;
  }

  Obj const *inherited(Obj const *page, std::string_view key) const
  {
    for (int depth = 0; page && depth < 32; ++depth) {
      if (auto const *v = lookup(page, key)) { return v; }
      page = lookup(page, "Parent");
    }
    return nullptr;
  }

private:
  void scan_objects()
  {
    std::size_t pos = 0;
    while ((pos = d_.find("obj", pos)) != std::string_view::npos) {
      std::size_t const after = pos + 3;
      bool const delimited = after >= d_.size() || !is_regular(static_cast<unsigned char>(d_[after]));
      std::size_t b = pos;
      auto back_digits = [&] {
        std::size_t const end = b;
        while (b > 0 && d_[b - 1] >= '0' && d_[b - 1] <= '9') { --b; }
        return end - b;
      };
      auto back_ws = [&] {
        std::size_t const end = b;
        while (b > 0 && is_ws(static_cast<unsigned char>(d_[b - 1]))) { --b; }
        return end - b;
      };
      if (!delimited || back_ws() == 0) {
        pos = after;
        continue;
      }
      std::size_t const gen_end = b;
      if (back_digits() == 0) {
        pos = after;
        continue;
      }
      std::size_t const gen_begin = b;
      if (back_ws() == 0) {
        pos = after;
        continue;
      }
      std::size_t const num_end = b;
      if (back_digits() == 0) {
        pos = after;
        continue;
      }
      int const num = std::atoi(std::string(d_.substr(b, num_end - b)).c_str());
      (void)gen_begin;
      (void)gen_end;

      Lexer lex(d_, after);
      Entry entry;
      try {
        entry.obj = lex.parse();
      } catch (ParseFailure const &) {
        pos = after;
        continue;
      }
      std::size_t next = lex.pos();
      if (entry.obj.is(Obj::Type::Dict)) {
        Lexer kw(d_, next);
        kw.skip_ws();
        if (d_.substr(kw.pos(), 6) == "stream") {
          std::size_t s = kw.pos() + 6;
          if (s < d_.size() && d_[s] == '\r') { ++s; }
          if (s < d_.size() && d_[s] == '\n') { ++s; }
          entry.stream = Stream{s, 0};
          pending_lengths_.push_back(num);
          auto const end = d_.find("endstream", s);
          next = end == std::string_view::npos ? d_.size() : end + 9;
          entry.stream->length = (end == std::string_view::npos ? d_.size() : end) - s;
        }
      }
      objects_[num] = std::move(entry);
      pos = std::max(next, after);
    }
    // Honour /Length when it is consistent with the data; the endstream scan is the fallback.
    for (int num : pending_lengths_) {
      auto &e = objects_[num];
      if (!e.stream) { continue; }
      Obj const *len = resolve(e.obj.get("Length"));
      if (len && len->is(Obj::Type::Number) && len->num >= 0) {
        auto const n = static_cast<std::size_t>(len->num);
        if (n <= e.stream->length) { e.stream->length = n; }
      }
    }
  }

  void read_trailers()
  {
    std::size_t pos = 0;
    while ((pos = d_.find("trailer", pos)) != std::string_view::npos) {
      Lexer lex(d_, pos + 7);
      try {
        Obj t = lex.parse();
        absorb_trailer(t);
      } catch (ParseFailure const &) {
      }
      pos += 7;
    }
    for (auto const &[num, e] : objects_) {
      if (auto const *t = e.obj.get("Type"); t && t->name_is("XRef")) { absorb_trailer(e.obj); }
    }
  }

  void absorb_trailer(Obj const &t)
  {
    if (!t.is(Obj::Type::Dict)) { return; }
    if (t.get("Encrypt")) { throw UnparsablePdfError("encrypted PDF"); }
    if (auto const *r = t.get("Root"); r && r->is(Obj::Type::Ref)) { root_ = *r; }
  }

  void expand_object_streams()
  {
    std::vector<int> streams;
    for (auto const &[num, e] : objects_) {
      if (auto const *t = e.obj.get("Type"); t && t->name_is("ObjStm")) { streams.push_back(num); }
    }
    for (int num : streams) {
      auto data = decode(objects_[num]);
      if (!data) { continue; }
      auto const *n = resolve(objects_[num].obj.get("N"));
      auto const *first = resolve(objects_[num].obj.get("First"));
      if (!n || !first || !n->is(Obj::Type::Number) || !first->is(Obj::Type::Number)) { continue; }
      auto const text = std::make_shared<std::string>(std::move(*data));
      object_stream_buffers_.push_back(text);
      Lexer header(*text);
      try {
        std::vector<std::pair<int, std::size_t>> index;
        for (int k = 0; k < static_cast<int>(n->num); ++k) {
          Obj a = header.parse();
          Obj b = header.parse();
          index.emplace_back(static_cast<int>(a.num), static_cast<std::size_t>(b.num));
        }
        for (auto [objnum, off] : index) {
          if (objects_.contains(objnum)) { continue; }
          Lexer body(*text, static_cast<std::size_t>(first->num) + off);
          Entry e;
          e.obj = body.parse();
          objects_[objnum] = std::move(e);
        }
      } catch (ParseFailure const &) {
      }
    }
  }

  std::optional<std::string> decode(Entry const &e) const
  {
    if (!e.stream) { return std::nullopt; }
    std::string data(d_.substr(e.stream->begin, e.stream->length));
    std::vector<Obj const *> filters;
    std::vector<Obj const *> parms;
    if (auto const *f = resolve(e.obj.get("Filter"))) {
      if (f->is(Obj::Type::Array)) {
        for (auto const &x : f->arr) { filters.push_back(resolve(&x)); }
      } else {
        filters.push_back(f);
      }
    }
    if (auto const *p = resolve(e.obj.get("DecodeParms"))) {
      if (p->is(Obj::Type::Array)) {
        for (auto const &x : p->arr) { parms.push_back(resolve(&x)); }
      } else {
        parms.push_back(p);
      }
    }
    for (std::size_t i = 0; i < filters.size(); ++i) {
      auto const *f = filters[i];
      if (!f || !f->is(Obj::Type::Name)) { return std::nullopt; }
      if (f->str == "FlateDecode" || f->str == "Fl") {
        auto out = inflate(data);
        if (!out) { return std::nullopt; }
        data = std::move(*out);
        Obj const *p = i < parms.size() ? parms[i] : nullptr;
        if (p && p->is(Obj::Type::Dict)) {
          auto num = [&](char const *k, int dflt) {
            auto const *v = resolve(p->get(k));
            return v && v->is(Obj::Type::Number) ? static_cast<int>(v->num) : dflt;
          };
          if (num("Predictor", 1) >= 10) {
            data = png_unpredict(data, num("Columns", 1), num("Colors", 1), num("BitsPerComponent", 8));
          }
        }
      } else if (f->str == "ASCIIHexDecode" || f->str == "AHx") {
        data = ascii_hex(data);
      } else if (f->str == "ASCII85Decode" || f->str == "A85") {
        data = ascii85(data);
      } else {
        return std::nullopt; // image codecs carry no text
      }
    }
    return data;
  }

  void collect_pages(Obj const *node, std::vector<Obj const *> &out, std::set<Obj const *> &seen, int depth) const
  {
    node = resolve(node);
    if (!node || !node->is(Obj::Type::Dict) || depth > 64 || !seen.insert(node).second) { return; }
    auto const *type = node->get("Type");
    if (type && type->name_is("Page")) {
      out.push_back(node);
      return;
    }
    if (auto const *kids = lookup(node, "Kids"); kids && kids->is(Obj::Type::Array)) {
      for (auto const &k : kids->arr) { collect_pages(&k, out, seen, depth + 1); }
    }
  }

  std::string_view d_;
  std::map<int, Entry> objects_;
  std::vector<int> pending_lengths_;
  std::vector<std::shared_ptr<std::string>> object_stream_buffers_;
  Obj root_;
};

// ---------------------------------------------------------------------------
// Text decoding

void append_utf8(std::string &out, std::uint32_t cp)
{
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string utf16be_to_utf8(std::string_view s)
{
  std::string out;
  for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
    std::uint32_t u = (static_cast<unsigned char>(s[i]) << 8) | static_cast<unsigned char>(s[i + 1]);
    if (u >= 0xD800 && u < 0xDC00 && i + 3 < s.size()) {
      std::uint32_t const lo = (static_cast<unsigned char>(s[i + 2]) << 8) | static_cast<unsigned char>(s[i + 3]);
      u = 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00);
      i += 2;
    }
    append_utf8(out, u);
  }
  return out;
}

// WinAnsiEncoding 0x80..0x9F
constexpr std::uint16_t kWinAnsiHigh[32] = {
  0x20AC, 0,      0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021, 0x02C6, 0x2030, 0x0160,
  0x2039, 0x0152, 0,      0x017D, 0,      0,      0x2018, 0x2019, 0x201C, 0x201D, 0x2022,
  0x2013, 0x2014, 0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0,      0x017E, 0x0178,
};

struct Font
{
  bool has_cmap = false;
  int code_bytes = 1;
  std::unordered_map<std::uint32_t, std::string> cmap;
  bool composite = false;

  std::string decode(std::string_view raw) const
  {
    std::string out;
    if (has_cmap) {
      for (std::size_t i = 0; i + code_bytes <= raw.size(); i += code_bytes) {
        std::uint32_t code = 0;
        for (int b = 0; b < code_bytes; ++b) { code = (code << 8) | static_cast<unsigned char>(raw[i + b]); }
        if (auto it = cmap.find(code); it != cmap.end()) { out += it->second; }
      }
      return out;
    }
    if (composite) { return out; } // CID glyph ids without ToUnicode cannot be mapped
    for (char ch : raw) {
      auto const c = static_cast<unsigned char>(ch);
      if (c >= 0x80 && c <= 0x9F) {
        if (kWinAnsiHigh[c - 0x80]) { append_utf8(out, kWinAnsiHigh[c - 0x80]); }
      } else if (c >= 0x20 || c == '\t') {
        append_utf8(out, c);
      }
    }
    return out;
  }
};

void parse_cmap(std::string const &text, Font &font)
{
  Lexer lex(text);
  std::vector<Obj> operands;
  int width = 0;
  try {
    while (!lex.eof()) {
      Obj o = lex.parse();
      if (!o.is(Obj::Type::Keyword)) {
        operands.push_back(std::move(o));
        continue;
      }
      if (o.str == "endcodespacerange" && operands.size() >= 2 && operands[0].is(Obj::Type::String)) {
        width = static_cast<int>(operands[0].str.size());
      } else if (o.str == "endbfchar") {
        for (std::size_t i = 0; i + 1 < operands.size(); i += 2) {
          auto const &src = operands[i].str;
          std::uint32_t code = 0;
          for (unsigned char b : src) { code = (code << 8) | b; }
          font.cmap[code] = utf16be_to_utf8(operands[i + 1].str);
          width = std::max(width, static_cast<int>(src.size()));
        }
      } else if (o.str == "endbfrange") {
        for (std::size_t i = 0; i + 2 < operands.size(); i += 3) {
          auto const &lo_s = operands[i].str;
          std::uint32_t lo = 0, hi = 0;
          for (unsigned char b : lo_s) { lo = (lo << 8) | b; }
          for (unsigned char b : operands[i + 1].str) { hi = (hi << 8) | b; }
          width = std::max(width, static_cast<int>(lo_s.size()));
          auto const &dst = operands[i + 2];
          for (std::uint32_t c = lo; c <= hi && c - lo < 65536; ++c) {
            if (dst.is(Obj::Type::Array)) {
              if (c - lo < dst.arr.size()) { font.cmap[c] = utf16be_to_utf8(dst.arr[c - lo].str); }
            } else {
              std::string d = dst.str;
              if (!d.empty()) {
                // increment the last UTF-16 unit
                std::uint32_t const off = c - lo;
                std::uint32_t last = static_cast<unsigned char>(d.back()) + off;
                d.back() = static_cast<char>(last & 0xFF);
                if (d.size() >= 2) {
                  d[d.size() - 2] = static_cast<char>((static_cast<unsigned char>(d[d.size() - 2]) + (last >> 8)) & 0xFF);
                }
              }
              font.cmap[c] = utf16be_to_utf8(d);
            }
          }
        }
      }
      operands.clear();
    }
  } catch (ParseFailure const &) {
  }
  font.has_cmap = !font.cmap.empty();
  if (width > 0) { font.code_bytes = width; }
}

class PageText
{
public:
  PageText(Document const &doc)
    : doc_(doc)
  {
  }

  std::string run(Obj const *page)
  {
    out_.clear();
    auto const *resources = doc_.inherited(page, "Resources");
    std::string content;
    if (auto const *raw = resolve_raw(page, "Contents")) {
      if (raw->is(Obj::Type::Array)) {
        for (auto const &part : raw->arr) {
          if (auto s = doc_.stream_of(&part)) { content += *s + "\n"; }
        }
      } else if (auto s = doc_.stream_of(raw)) {
        content = std::move(*s);
      }
    }
    interpret(content, resources, 0);
    return out_;
  }

private:
  Obj const *resolve_raw(Obj const *dict, std::string_view key) const
  {
    auto const *d = doc_.resolve(dict);
    if (!d) { return nullptr; }
    auto const *v = d->get(key);
    // keep single references unresolved so stream_of can find the stream
    if (v && v->is(Obj::Type::Ref)) {
      auto const *target = doc_.resolve(v);
      if (target && target->is(Obj::Type::Array)) { return target; }
    }
    return v;
  }

  Font const &font_for(Obj const *resources, std::string const &name)
  {
    auto const key = std::to_string(reinterpret_cast<std::uintptr_t>(resources)) + "/" + name;
    if (auto it = fonts_.find(key); it != fonts_.end()) { return it->second; }
    Font font;
    if (auto const *fonts = doc_.lookup(resources, "Font")) {
      if (auto const *fdict = doc_.lookup(fonts, name)) {
        auto const *subtype = fdict->get("Subtype");
        font.composite = subtype && subtype->name_is("Type0");
        if (font.composite) { font.code_bytes = 2; }
        if (auto cmap = doc_.stream_of(fdict->get("ToUnicode"))) { parse_cmap(*cmap, font); }
      }
    }
    return fonts_.emplace(key, std::move(font)).first->second;
  }

  void newline(double gap)
  {
    if (out_.empty()) { return; }
    bool const paragraph = font_size_ > 0 && std::abs(gap) > 1.6 * font_size_;
    while (!out_.empty() && out_.back() == ' ') { out_.pop_back(); }
    if (paragraph) {
      if (!out_.ends_with("\n\n")) { out_ += out_.ends_with('\n') ? "\n" : "\n\n"; }
    } else if (!out_.ends_with('\n')) {
      out_ += '\n';
    }
  }

  void space()
  {
    if (!out_.empty() && out_.back() != ' ' && out_.back() != '\n') { out_ += ' '; }
  }

  void show(Font const *font, std::string const &raw)
  {
    static Font const fallback;
    out_ += (font ? *font : fallback).decode(raw);
  }

  static double num(std::vector<Obj> const &ops, std::size_t i)
  {
    return i < ops.size() && ops[i].is(Obj::Type::Number) ? ops[i].num : 0.0;
  }

  void interpret(std::string const &content, Obj const *resources, int depth)
  {
    if (depth > 8) { return; }
    Lexer lex(content);
    std::vector<Obj> ops;
    Font const *font = nullptr;
    double line_y = 0;
    try {
      while (!lex.eof()) {
        Obj o = lex.parse();
        if (!o.is(Obj::Type::Keyword)) {
          ops.push_back(std::move(o));
          continue;
        }
        auto const &op = o.str;
        if (op == "BI") {
          // inline image: skip binary payload up to EI
          auto const id = content.find("ID", lex.pos());
          auto const ei = id == std::string::npos ? std::string::npos : content.find("EI", id + 3);
          lex.seek(ei == std::string::npos ? content.size() : ei + 2);
        } else if (op == "Tf") {
          if (!ops.empty() && ops[0].is(Obj::Type::Name)) { font = &font_for(resources, ops[0].str); }
          font_size_ = std::abs(num(ops, 1));
        } else if (op == "Tj" && !ops.empty()) {
          show(font, ops.back().str);
        } else if (op == "'" && !ops.empty()) {
          newline(0);
          show(font, ops.back().str);
        } else if (op == "\"" && !ops.empty()) {
          newline(0);
          show(font, ops.back().str);
        } else if (op == "TJ" && !ops.empty() && ops.back().is(Obj::Type::Array)) {
          for (auto const &el : ops.back().arr) {
            if (el.is(Obj::Type::String)) {
              show(font, el.str);
            } else if (el.is(Obj::Type::Number) && el.num < -250) {
              space();
            }
          }
        } else if (op == "Td" || op == "TD") {
          double const ty = num(ops, 1);
          if (ty != 0) {
            newline(ty);
          } else if (num(ops, 0) > 0) {
            space();
          }
        } else if (op == "T*") {
          newline(0);
        } else if (op == "Tm") {
          double const y = num(ops, 5);
          if (y != line_y) {
            newline(y - line_y);
          } else {
            space();
          }
          line_y = y;
        } else if (op == "ET") {
          space();
        } else if (op == "Do" && !ops.empty() && ops[0].is(Obj::Type::Name)) {
          if (auto const *xobjects = doc_.lookup(resources, "XObject")) {
            auto const *xref = doc_.resolve(xobjects)->get(ops[0].str);
            auto const *x = doc_.resolve(xref);
            auto const *subtype = x ? x->get("Subtype") : nullptr;
            if (subtype && subtype->name_is("Form")) {
              if (auto body = doc_.stream_of(xref)) {
                auto const *inner = doc_.lookup(x, "Resources");
                interpret(*body, inner ? inner : resources, depth + 1);
              }
            }
          }
        }
        ops.clear();
      }
    } catch (ParseFailure const &) {
    }
  }

  Document const &doc_;
  std::string out_;
  double font_size_ = 0;
  std::map<std::string, Font> fonts_;
};

} // namespace

std::vector<std::string> TextLayerExtractor::extract_pages(std::span<std::byte const> pdf) const
{
  std::string_view const data(reinterpret_cast<char const *>(pdf.data()), pdf.size());
  Document doc(data);
  auto const pages = doc.pages();
  if (pages.empty()) { throw UnparsablePdfError("no pages found"); }
  std::vector<std::string> out;
  PageText text(doc);
  for (auto const *page : pages) { out.push_back(text.run(page)); }
  return out;
}

// ---------------------------------------------------------------------------
// Chunking and uploads

std::vector<std::string> chunk_text(std::vector<std::string> const &pages, std::size_t max_chars)
{
  std::vector<std::string> paragraphs;
  for (auto const &page : pages) {
    std::string para;
    std::size_t pos = 0;
    auto flush = [&] {
      if (!para.empty()) { paragraphs.push_back(std::move(para)); }
      para.clear();
    };
    while (pos <= page.size()) {
      auto nl = page.find('\n', pos);
      if (nl == std::string::npos) { nl = page.size(); }
      std::string_view line(page.data() + pos, nl - pos);
      while (!line.empty() && is_ws(static_cast<unsigned char>(line.front()))) { line.remove_prefix(1); }
      while (!line.empty() && is_ws(static_cast<unsigned char>(line.back()))) { line.remove_suffix(1); }
      if (line.empty()) {
        flush();
      } else {
        if (!para.empty()) {
          if (para.back() == '-') {
            para.pop_back(); // de-hyphenate line breaks
          } else {
            para += ' ';
          }
        }
        para += line;
      }
      pos = nl + 1;
    }
    flush();
  }

  std::vector<std::string> chunks;
  std::string cur;
  auto add = [&](std::string const &piece) {
    if (!cur.empty() && cur.size() + 1 + piece.size() > max_chars) {
      chunks.push_back(std::move(cur));
      cur.clear();
    }
    if (!cur.empty()) { cur += ' '; }
    cur += piece;
  };
  for (auto const &p : paragraphs) {
    if (p.size() <= max_chars) {
      add(p);
    } else {
      for (auto const &s : split_sentences(p)) { add(s); }
    }
  }
  if (!cur.empty()) { chunks.push_back(std::move(cur)); }
  return chunks;
}

std::string random_id()
{
  unsigned char buf[16];
  if (RAND_bytes(buf, sizeof buf) != 1) { throw std::runtime_error("RAND_bytes failed"); }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char b : buf) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xF]);
  }
  return out;
}

ParsedUpload parse_user_pdf(std::span<std::byte const> bytes, std::string filename, UploadOptions const &options)
{
  static TextLayerExtractor const default_extractor;
  PdfTextExtractor const &extractor = options.extractor ? *options.extractor : default_extractor;

  // The worker owns a copy of the input so an abandoned parse cannot outlive it.
  auto input = std::make_shared<std::vector<std::byte>>(bytes.begin(), bytes.end());
  auto task = std::make_shared<std::packaged_task<std::vector<std::string>()>>(
    [input, &extractor] { return extractor.extract_pages(*input); });
  auto result = task->get_future();
  std::thread([task] { (*task)(); }).detach();

  if (result.wait_for(options.timeout) != std::future_status::ready) {
    throw ParseTimeoutError("PDF parsing exceeded " + std::to_string(options.timeout.count()) + " ms");
  }
  std::vector<std::string> pages;
  try {
    pages = result.get();
  } catch (Error const &) {
    throw;
  } catch (std::exception const &e) {
    throw UnparsablePdfError(e.what());
  }

  ParsedUpload up;
  up.upload_id = random_id();
  up.filename = std::move(filename);
  up.chunks = chunk_text(pages, options.chunk_chars);
  up.created_at = std::chrono::system_clock::now();
  if (up.chunks.empty()) { throw EmptyDocumentError(up.filename + ": no extractable text"); }
  return up;
}

} // namespace resrag
