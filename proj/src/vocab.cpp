#include "voxflow/data/vocab.hpp"

#include <fstream>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

Vocabulary::Vocabulary(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    for (int i = 0; i < static_cast<int>(symbols_.size()); ++i) {
        if (symbols_[i].empty()) throw Error("vocab: empty symbol at index " + std::to_string(i));
        auto [it, inserted] = ids_.emplace(symbols_[i], i);
        if (!inserted) throw Error("vocab: duplicate symbol '" + symbols_[i] + "'");
    }
    if (symbols_.empty()) throw Error("vocab: no symbols");
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("vocab: cannot open " + path);
    std::vector<std::string> symbols;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        symbols.push_back(line);
    }
    return Vocabulary(std::move(symbols));
}

const std::string& Vocabulary::symbol(int id) const {
    if (id < 0 || id >= size()) throw Error("vocab: id out of range: " + std::to_string(id));
    return symbols_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& symbol) const {
    auto it = ids_.find(symbol);
    if (it == ids_.end()) throw Error("vocab: unknown symbol '" + symbol + "'");
    return it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& symbols) const {
    std::vector<int> out;
    out.reserve(symbols.size());
    for (const auto& s : symbols) out.push_back(id(s));
    return out;
}

}  // namespace voxflow
