#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hwdbg/value.hpp"

namespace hwdbg {

struct TextPos {
  uint32_t line = 1;
  uint32_t column = 1;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::string file, TextPos pos, const std::string& message);

  const std::string& file() const { return file_; }
  TextPos pos() const { return pos_; }
  const std::string& message() const { return message_; }

 private:
  std::string file_;
  TextPos pos_;
  std::string message_;
};

enum class TokenKind { kIdent, kNumber, kPunct, kEnd };

struct Token {
  TokenKind kind = TokenKind::kEnd;
  std::string text;
  TextPos pos;
};

// Tokenizer shared by the hardware language and the debugger expression
// language. `//` comments run to end of line.
std::vector<Token> tokenize(std::string_view text, const std::string& file);

// Cursor over a token vector with the usual helpers.
class TokenStream {
 public:
  TokenStream(std::vector<Token> tokens, std::string file)
      : tokens_(std::move(tokens)), file_(std::move(file)) {}

  const Token& peek(size_t ahead = 0) const;
  const Token& next();
  bool at_end() const { return peek().kind == TokenKind::kEnd; }

  bool is_punct(std::string_view p, size_t ahead = 0) const;
  bool is_ident(std::string_view word, size_t ahead = 0) const;
  bool accept_punct(std::string_view p);
  bool accept_ident(std::string_view word);
  const Token& expect_punct(std::string_view p);
  const Token& expect_ident(std::string_view what = "identifier");
  const Token& expect_ident_word(std::string_view word);
  uint64_t expect_number();

  [[noreturn]] void fail(const Token& at, const std::string& message) const;
  const std::string& file() const { return file_; }

 private:
  std::vector<Token> tokens_;
  size_t index_ = 0;
  std::string file_;
};

}  // namespace hwdbg
