#include "hwdbg/lexer.hpp"

#include <array>
#include <cctype>

namespace hwdbg {

namespace {

std::string format_location(const std::string& file, TextPos pos,
                            const std::string& message) {
  std::string out = file.empty() ? std::string("<input>") : file;
  out += ":" + std::to_string(pos.line) + ":" + std::to_string(pos.column) +
         ": " + message;
  return out;
}

constexpr std::array<std::string_view, 10> kTwoCharPuncts = {
    "&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "..", "=>"};

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

SyntaxError::SyntaxError(std::string file, TextPos pos, const std::string& message)
    : Error(format_location(file, pos, message)),
      file_(std::move(file)),
      pos_(pos),
      message_(message) {}

std::vector<Token> tokenize(std::string_view text, const std::string& file) {
  std::vector<Token> out;
  TextPos pos;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n && i < text.size(); ++k, ++i) {
      if (text[i] == '\n') {
        ++pos.line;
        pos.column = 1;
      } else {
        ++pos.column;
      }
    }
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    Token tok;
    tok.pos = pos;
    if (is_ident_start(c)) {
      size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      tok.kind = TokenKind::kIdent;
      tok.text = std::string(text.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      if (c == '0' && j + 1 < text.size() && (text[j + 1] == 'x' || text[j + 1] == 'X')) {
        j += 2;
        while (j < text.size() && std::isxdigit(static_cast<unsigned char>(text[j]))) ++j;
      } else {
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      if (j < text.size() && is_ident_char(text[j])) {
        throw SyntaxError(file, pos, "malformed number");
      }
      tok.kind = TokenKind::kNumber;
      tok.text = std::string(text.substr(i, j - i));
      if (!parse_uint(tok.text)) throw SyntaxError(file, pos, "malformed number '" + tok.text + "'");
      advance(j - i);
    } else {
      tok.kind = TokenKind::kPunct;
      std::string_view two = text.substr(i, 2);
      bool matched = false;
      for (auto p : kTwoCharPuncts) {
        if (two == p) {
          tok.text = std::string(p);
          matched = true;
          break;
        }
      }
      if (!matched) {
        static constexpr std::string_view kSingle = "~!-+*/%&|^<>()[]{};:,=.?@";
        if (kSingle.find(c) == std::string_view::npos) {
          throw SyntaxError(file, pos, std::string("unexpected character '") + c + "'");
        }
        tok.text = std::string(1, c);
      }
      advance(tok.text.size());
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = TokenKind::kEnd;
  end.pos = pos;
  out.push_back(end);
  return out;
}

const Token& TokenStream::peek(size_t ahead) const {
  const size_t k = index_ + ahead;
  return k < tokens_.size() ? tokens_[k] : tokens_.back();
}

const Token& TokenStream::next() {
  const Token& t = peek();
  if (index_ < tokens_.size() - 1) ++index_;
  return t;
}

bool TokenStream::is_punct(std::string_view p, size_t ahead) const {
  const Token& t = peek(ahead);
  return t.kind == TokenKind::kPunct && t.text == p;
}

bool TokenStream::is_ident(std::string_view word, size_t ahead) const {
  const Token& t = peek(ahead);
  return t.kind == TokenKind::kIdent && t.text == word;
}

bool TokenStream::accept_punct(std::string_view p) {
  if (!is_punct(p)) return false;
  next();
  return true;
}

bool TokenStream::accept_ident(std::string_view word) {
  if (!is_ident(word)) return false;
  next();
  return true;
}

const Token& TokenStream::expect_punct(std::string_view p) {
  if (!is_punct(p)) {
    const Token& t = peek();
    fail(t, "expected '" + std::string(p) + "' but found " +
                (t.kind == TokenKind::kEnd ? std::string("end of input") : "'" + t.text + "'"));
  }
  return next();
}

const Token& TokenStream::expect_ident(std::string_view what) {
  if (peek().kind != TokenKind::kIdent) {
    const Token& t = peek();
    fail(t, "expected " + std::string(what) + " but found " +
                (t.kind == TokenKind::kEnd ? std::string("end of input") : "'" + t.text + "'"));
  }
  return next();
}

const Token& TokenStream::expect_ident_word(std::string_view word) {
  if (!is_ident(word)) fail(peek(), "expected '" + std::string(word) + "'");
  return next();
}

uint64_t TokenStream::expect_number() {
  const Token& t = peek();
  if (t.kind != TokenKind::kNumber) fail(t, "expected integer constant");
  next();
  return *parse_uint(t.text);
}

void TokenStream::fail(const Token& at, const std::string& message) const {
  throw SyntaxError(file_, at.pos, message);
}

}  // namespace hwdbg
