#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "zsrc/wordvec.hpp"

using namespace zsrc;

TEST_SUITE_BEGIN("wordvec");

TEST_CASE("insert validates dimension, duplicates, and finiteness") {
    WordVectors wv(3);
    wv.insert("cat", {1, 2, 3});
    CHECK(wv.size() == 1);
    CHECK(wv.contains("cat"));
    CHECK(*wv.find("cat") == Vec{1, 2, 3});
    CHECK(wv.find("dog") == nullptr);
    CHECK_THROWS_AS(wv.insert("cat", {4, 5, 6}), ValidationError);
    CHECK_THROWS_AS(wv.insert("dog", {1, 2}), ValidationError);
    CHECK_THROWS_AS(wv.insert("dog", {1, 2, std::nan("")}), ValidationError);
    CHECK_THROWS_AS(wv.insert("", {1, 2, 3}), ValidationError);
    CHECK_THROWS_AS(WordVectors(0), ValidationError);
    CHECK_THROWS_AS(wv.at(5), ValidationError);
}

TEST_CASE("word vector files round trip exactly") {
    testutil::TempDir tmp;
    WordVectors wv(4);
    Rng rng = make_rng(21);
    for (const char* w : {"alpha", "beta", "gamma"}) {
        Vec v(4);
        for (double& x : v) x = uniform_real(rng, -2, 2);
        wv.insert(w, v);
    }
    save_word_vectors(wv, tmp.file("wv.txt"));
    CHECK(load_word_vectors(tmp.file("wv.txt")) == wv);
}

TEST_CASE("word vector loader rejects malformed input") {
    testutil::TempDir tmp;
    auto write = [&](const char* name, const std::string& body) {
        std::ofstream(tmp.file(name)) << body;
        return tmp.file(name);
    };
    CHECK_THROWS_AS(load_word_vectors(tmp.file("absent.txt")), ValidationError);
    CHECK_THROWS_AS(load_word_vectors(write("h.txt", "nonsense header\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_word_vectors(write("c.txt", "2 3\na 1 2 3\n")), ValidationError);
    CHECK_THROWS_AS(load_word_vectors(write("d.txt", "1 3\na 1 2\n")), ValidationError);
    CHECK_THROWS_AS(load_word_vectors(write("e.txt", "1 3\na 1 2 3 4\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_word_vectors(write("f.txt", "2 3\na 1 2 3\na 4 5 6\n")),
                    ValidationError);
}

TEST_CASE("label tokenizer lowercases and splits on non-alphanumerics") {
    CHECK(tokenize_label("place_of_birth") ==
          std::vector<std::string>{"place", "of", "birth"});
    CHECK(tokenize_label("Mother") == std::vector<std::string>{"mother"});
    CHECK(tokenize_label("a.b/c d") == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(tokenize_label("city2") == std::vector<std::string>{"city2"});
    CHECK(tokenize_label("___") == std::vector<std::string>{});
    CHECK(tokenize_label("") == std::vector<std::string>{});
}

TEST_SUITE_END();
