#pragma once

#include <map>
#include <string>
#include <vector>

namespace voxflow {

// Phoneme symbol table. One symbol per line, id = line index.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> symbols);

    static Vocabulary load(const std::string& path);

    int size() const { return static_cast<int>(symbols_.size()); }
    const std::string& symbol(int id) const;
    int id(const std::string& symbol) const;  // throws naming the symbol if unknown
    bool contains(const std::string& symbol) const { return ids_.count(symbol) > 0; }
    std::vector<int> encode(const std::vector<std::string>& symbols) const;
    const std::vector<std::string>& symbols() const { return symbols_; }

private:
    std::vector<std::string> symbols_;
    std::map<std::string, int> ids_;
};

}  // namespace voxflow
