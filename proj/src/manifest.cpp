#include "voxflow/data/manifest.hpp"

#include <fstream>
#include <sstream>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<UtteranceRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("manifest: cannot open " + path);
    std::vector<UtteranceRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        // split on '|'
        std::vector<std::string> fields;
        std::string cur;
        for (char c : t) {
            if (c == '|') {
                fields.push_back(trim(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        fields.push_back(trim(cur));
        if (fields.size() != 3)
            throw Error("manifest: line " + std::to_string(lineno) + ": expected 3 '|'-separated fields, got " +
                        std::to_string(fields.size()));
        UtteranceRecord rec;
        rec.audio_path = fields[0];
        rec.speaker_id = fields[1];
        std::istringstream ph(fields[2]);
        std::string sym;
        while (ph >> sym) rec.phonemes.push_back(sym);
        if (rec.audio_path.empty())
            throw Error("manifest: line " + std::to_string(lineno) + ": empty audio path");
        if (rec.speaker_id.empty())
            throw Error("manifest: line " + std::to_string(lineno) + ": empty speaker id");
        if (rec.phonemes.empty())
            throw Error("manifest: line " + std::to_string(lineno) + ": empty phoneme sequence");
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw Error("manifest: no records in " + path);
    return records;
}

std::map<std::string, std::vector<int>> speaker_index(const std::vector<UtteranceRecord>& records) {
    std::map<std::string, std::vector<int>> index;
    for (int i = 0; i < static_cast<int>(records.size()); ++i) index[records[i].speaker_id].push_back(i);
    return index;
}

}  // namespace voxflow
