#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isac/mat.hpp"

namespace isac {

/// Tokenized prompt with flagged class tokens and per-class instance counts.
struct PromptSpec {
    std::vector<std::string> tokens;      // L token identifiers
    Mat embeddings;                       // L×d, deterministic per (token, seed)
    std::vector<int> class_token_indices; // positions of the k class tokens
    std::vector<int> instance_counts;     // n_1..n_k, each >= 1

    int length() const { return static_cast<int>(tokens.size()); }
    int num_classes() const { return static_cast<int>(class_token_indices.size()); }
    int total_instances() const;

    void validate() const;  // throws ConfigError on invariant breach
};

/// Split on whitespace only.
std::vector<std::string> tokenize(const std::string& text);

/// Build a PromptSpec from prompt text. Class tokens are located by
/// matching class names against tokens after stripping punctuation and an
/// optional plural 's'. Embeddings are unit-scale Gaussians seeded by
/// (token identifier, seed), so the same token always embeds identically.
PromptSpec build_prompt_spec(const std::string& text,
                             const std::vector<std::string>& class_names,
                             const std::vector<int>& instance_counts, int dim,
                             uint64_t seed);

/// Benchmark prompt templates.
/// multi-class k=2: "A photo of a cat and a dog."
/// multi-class k>2: "A photo of a cat, a dog, and a fox."
std::string render_multiclass_prompt(const std::vector<std::string>& classes);
/// multi-instance: "A photo of three cats."
std::string render_multiinstance_prompt(const std::string& cls, int count);

}  // namespace isac
