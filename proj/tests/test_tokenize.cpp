#include <catch2/catch_amalgamated.hpp>

#include <toolgraph/toolgraph.hpp>

using namespace toolgraph;

TEST_CASE("tokenizer splits identifiers numbers strings and operators") {
    auto texts = token_texts("x = foo(3, y_2) + 1.5e3");
    REQUIRE(texts == std::vector<std::string>{"x", "=", "foo", "(", "NUM", ",", "y_2", ")", "+",
                                              "NUM"});
}

TEST_CASE("comments are dropped") {
    CHECK(token_texts("a # trailing\nb") == std::vector<std::string>{"a", "b"});
    CHECK(token_texts("a // trailing\nb") == std::vector<std::string>{"a", "b"});
    CHECK(token_texts("a /* span\nlines */ b") ==
          std::vector<std::string>{"a", "b"});
}

TEST_CASE("string literals collapse to STR") {
    CHECK(token_texts("s = 'it\\'s'") ==
          std::vector<std::string>{"s", "=", "STR"});
    CHECK(token_texts("s = \"two\" 'one'") ==
          std::vector<std::string>{"s", "=", "STR", "STR"});
    CHECK(token_texts("d = '''doc\nstring''' x") ==
          std::vector<std::string>{"d", "=", "STR", "x"});
}

TEST_CASE("unterminated string ends at the line break") {
    auto texts = token_texts("a = 'oops\nb");
    CHECK(texts == std::vector<std::string>{"a", "=", "STR", "b"});
}

TEST_CASE("multi-character operators are greedy") {
    CHECK(token_texts("a **= 2") == std::vector<std::string>{"a", "**=", "NUM"});
    CHECK(token_texts("a ** b << c <= d") ==
          std::vector<std::string>{"a", "**", "b", "<<", "c", "<=", "d"});
    CHECK(token_texts("a->b") == std::vector<std::string>{"a", "->", "b"});
}

TEST_CASE("numbers keep exponents and dots together") {
    CHECK(tokenize_source("3.14").size() == 1);
    CHECK(tokenize_source("1e-3").size() == 1);
    CHECK(tokenize_source("2E+10").size() == 1);
}

TEST_CASE("call sites are identifiers followed by an open paren") {
    auto sites = call_sites("foo(bar(1), baz)");
    REQUIRE(sites == std::vector<std::string>{"foo", "bar"});
}

TEST_CASE("reserved words and definition heads are not call sites") {
    CHECK(call_sites("if (x): foo()") == std::vector<std::string>{"foo"});
    CHECK(call_sites("while (y): pass") == std::vector<std::string>{});
    CHECK(call_sites("def helper(a): return helper_aux(a)") ==
          std::vector<std::string>{"helper_aux"});
    CHECK(call_sites("function make(x) { return use(x); }") == std::vector<std::string>{"use"});
}

TEST_CASE("call sites inside strings and comments are invisible") {
    CHECK(call_sites("s = 'foo(1)'").empty());
    CHECK(call_sites("# foo(1)\npass").empty());
}

TEST_CASE("is_reserved_word covers control and definition words") {
    for (auto word : {"if", "elif", "else", "for", "while", "try", "except", "return", "with",
                      "and", "or", "not", "in", "is", "def", "function", "lambda", "class",
                      "import", "from", "async", "await"})
        CHECK(is_reserved_word(word));
    CHECK_FALSE(is_reserved_word("craft_object"));
}
