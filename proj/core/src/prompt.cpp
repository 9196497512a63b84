#include "isac/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "isac/rng.hpp"

namespace isac {

int PromptSpec::total_instances() const {
    int n = 0;
    for (int c : instance_counts) n += c;
    return n;
}

void PromptSpec::validate() const {
    if (tokens.empty()) throw ConfigError("prompt: empty token list");
    if (embeddings.rows != length()) throw ConfigError("prompt: embedding row count mismatch");
    if (class_token_indices.empty()) throw ConfigError("prompt: no class tokens");
    if (class_token_indices.size() != instance_counts.size())
        throw ConfigError("prompt: class/count size mismatch");
    std::vector<int> sorted = class_token_indices;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] < 0 || sorted[i] >= length())
            throw ConfigError("prompt: class token index out of range");
        if (i > 0 && sorted[i] == sorted[i - 1])
            throw ConfigError("prompt: duplicate class token index");
    }
    for (int n : instance_counts)
        if (n < 1) throw ConfigError("prompt: instance count < 1");
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

namespace {

std::string normalize_token(const std::string& tok) {
    std::string s;
    for (char c : tok)
        if (std::isalpha(static_cast<unsigned char>(c)))
            s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return s;
}

bool token_matches_class(const std::string& tok, const std::string& cls) {
    std::string t = normalize_token(tok);
    std::string c = normalize_token(cls);
    return t == c || t == c + "s";
}

}  // namespace

PromptSpec build_prompt_spec(const std::string& text,
                             const std::vector<std::string>& class_names,
                             const std::vector<int>& instance_counts, int dim,
                             uint64_t seed) {
    if (class_names.size() != instance_counts.size())
        throw ConfigError("build_prompt_spec: class/count size mismatch");
    PromptSpec p;
    p.tokens = tokenize(text);
    if (p.tokens.empty()) throw ConfigError("build_prompt_spec: empty prompt");
    p.instance_counts = instance_counts;

    std::vector<bool> used(p.tokens.size(), false);
    for (const auto& cls : class_names) {
        int found = -1;
        for (size_t i = 0; i < p.tokens.size(); ++i) {
            if (!used[i] && token_matches_class(p.tokens[i], cls)) {
                found = static_cast<int>(i);
                break;
            }
        }
        if (found < 0)
            throw ConfigError("build_prompt_spec: class token not found in prompt: " + cls);
        used[found] = true;
        p.class_token_indices.push_back(found);
    }

    p.embeddings = Mat(p.length(), dim);
    for (int i = 0; i < p.length(); ++i) {
        Rng rng(derive_seed(seed, "token-embed", fnv1a64(p.tokens[i])));
        for (int j = 0; j < dim; ++j) p.embeddings.at(i, j) = rng.normal();
    }
    p.validate();
    return p;
}

std::string render_multiclass_prompt(const std::vector<std::string>& classes) {
    if (classes.size() < 2) throw ConfigError("multi-class prompt needs >= 2 classes");
    std::string s = "A photo of a " + classes[0];
    if (classes.size() == 2) {
        s += " and a " + classes[1] + ".";
        return s;
    }
    for (size_t i = 1; i + 1 < classes.size(); ++i) s += ", a " + classes[i];
    s += ", and a " + classes.back() + ".";
    return s;
}

std::string render_multiinstance_prompt(const std::string& cls, int count) {
    static const char* words[] = {"zero", "one", "two",   "three", "four",
                                  "five", "six", "seven", "eight", "nine"};
    std::string num = (count >= 0 && count <= 9) ? words[count] : std::to_string(count);
    return "A photo of " + num + " " + cls + "s.";
}

}  // namespace isac
