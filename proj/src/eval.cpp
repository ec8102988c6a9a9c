#include "voxflow/eval/eval.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace voxflow {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || a.size() != b.size())
        throw Error("cosine: need equal-dimension non-empty vectors");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) throw Error("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::string> tokenize_words(const std::string& text) {
    std::istringstream is(text);
    std::vector<std::string> words;
    std::string w;
    while (is >> w) words.push_back(w);
    return words;
}

int word_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min(sub, std::min(prev[j] + 1, cur[j - 1] + 1));
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

CommandResult run_command_capture(const std::string& command) {
    CommandResult r;
    // Brace group + newline so the redirect survives trailing comments.
    std::string wrapped = "{ " + command + "\n} 2>&1";
    FILE* pipe = popen(wrapped.c_str(), "r");
    if (!pipe) throw Error("command: cannot launch: " + command);
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, got);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

double wer_hook(const std::vector<std::string>& expected,
                const std::vector<std::string>& audio_paths,
                const std::string& asr_command_template) {
    if (expected.empty() || expected.size() != audio_paths.size())
        throw Error("wer: need matching non-empty transcript/audio lists");
    size_t slot = asr_command_template.find("{}");
    if (slot == std::string::npos)
        throw Error("wer: command template must contain a {} placeholder for the audio path");

    int64_t errors = 0, words = 0;
    for (size_t i = 0; i < expected.size(); ++i) {
        std::vector<std::string> want = tokenize_words(expected[i]);
        if (want.empty()) throw Error("wer: empty expected text for " + audio_paths[i]);
        std::string cmd = asr_command_template;
        cmd.replace(slot, 2, audio_paths[i]);
        CommandResult res = run_command_capture(cmd);
        if (res.exit_code != 0)
            throw Error("wer: recognizer failed on " + audio_paths[i] + " (exit " +
                        std::to_string(res.exit_code) + "): " + res.output);
        errors += word_edit_distance(want, tokenize_words(res.output));
        words += static_cast<int64_t>(want.size());
    }
    return static_cast<double>(errors) / static_cast<double>(words);
}

}  // namespace voxflow
