#pragma once

#include <map>
#include <string>
#include <vector>

namespace voxflow {

struct UtteranceRecord {
    std::string audio_path;
    std::string speaker_id;
    std::vector<std::string> phonemes;
    double duration_s = 0.0;  // filled when audio is loaded
};

// Line format: audio_path | speaker_id | space-separated phoneme symbols.
// Blank lines and lines starting with '#' are skipped.
std::vector<UtteranceRecord> load_manifest(const std::string& path);

// speaker_id -> indices into the record list, in file order.
std::map<std::string, std::vector<int>> speaker_index(const std::vector<UtteranceRecord>& records);

}  // namespace voxflow
