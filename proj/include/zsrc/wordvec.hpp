#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "zsrc/vec.hpp"

namespace zsrc {

// Frozen word vector lookup. Words keep insertion order so files round-trip
// byte for byte.
class WordVectors {
public:
    WordVectors() = default;
    explicit WordVectors(int dim);

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(words_.size()); }
    const std::vector<std::string>& words() const { return words_; }

    // nullptr when absent.
    const Vec* find(const std::string& word) const;
    const Vec& at(int id) const;
    bool contains(const std::string& word) const { return find(word) != nullptr; }

    // Throws on duplicate word, dimension mismatch, or non-finite entries.
    void insert(const std::string& word, Vec v);

    friend bool operator==(const WordVectors&, const WordVectors&) = default;

private:
    int dim_ = 0;
    std::vector<std::string> words_;
    std::vector<Vec> vectors_;
    std::unordered_map<std::string, int> ids_;
};

// Text format: `<count> <dim>` header, then `<word> v1 ... v_dim` per line.
WordVectors load_word_vectors(const std::string& path);
void save_word_vectors(const WordVectors& wv, const std::string& path);

// Lowercases and splits on every non-alphanumeric character; empty pieces
// dropped.
std::vector<std::string> tokenize_label(const std::string& label);

}  // namespace zsrc
