#include "zsrc/wordvec.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "zsrc/errors.hpp"
#include "zsrc/io_util.hpp"

namespace zsrc {

WordVectors::WordVectors(int dim) : dim_(dim) {
    if (dim <= 0) throw ValidationError("word vectors: dim must be positive");
}

const Vec* WordVectors::find(const std::string& word) const {
    auto it = ids_.find(word);
    return it == ids_.end() ? nullptr : &vectors_[static_cast<std::size_t>(it->second)];
}

const Vec& WordVectors::at(int id) const {
    if (id < 0 || id >= size())
        throw ValidationError("word vector id out of range: " + std::to_string(id));
    return vectors_[static_cast<std::size_t>(id)];
}

void WordVectors::insert(const std::string& word, Vec v) {
    if (dim_ == 0) dim_ = static_cast<int>(v.size());
    if (word.empty()) throw ValidationError("word vectors: empty word");
    if (static_cast<int>(v.size()) != dim_)
        throw ValidationError("word vectors: dimension mismatch for '" + word + "'");
    if (!all_finite(v))
        throw ValidationError("word vectors: non-finite entry for '" + word + "'");
    if (!ids_.emplace(word, size()).second)
        throw ValidationError("word vectors: duplicate word '" + word + "'");
    words_.push_back(word);
    vectors_.push_back(std::move(v));
}

WordVectors load_word_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open word vector file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(path + ":1: missing `<count> <dim>` header");
    long count = 0;
    int dim = 0;
    {
        std::istringstream hdr(line);
        std::string extra;
        if (!(hdr >> count >> dim) || (hdr >> extra) || count < 0 || dim <= 0)
            throw ValidationError(path + ":1: malformed `<count> <dim>` header");
    }
    WordVectors wv(dim);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string word;
        row >> word;
        Vec v(static_cast<std::size_t>(dim));
        for (double& x : v)
            if (!(row >> x))
                throw ValidationError(path + ":" + std::to_string(lineno) +
                                      ": expected " + std::to_string(dim) + " values");
        double extra;
        if (row >> extra)
            throw ValidationError(path + ":" + std::to_string(lineno) + ": too many values");
        try {
            wv.insert(word, std::move(v));
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (wv.size() != count)
        throw ValidationError(path + ": header promises " + std::to_string(count) +
                              " words, found " + std::to_string(wv.size()));
    return wv;
}

void save_word_vectors(const WordVectors& wv, const std::string& path) {
    std::ostringstream out;
    out << wv.size() << ' ' << wv.dim() << '\n';
    for (int i = 0; i < wv.size(); ++i) {
        out << wv.words()[static_cast<std::size_t>(i)];
        for (double x : wv.at(i)) out << ' ' << format_double(x);
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<std::string> tokenize_label(const std::string& label) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace zsrc
