#pragma once

#include <array>
#include <string>
#include <vector>

#include "isac/engine.hpp"
#include "isac/image.hpp"

namespace isac {

struct Detection {
    int class_index = -1;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open pixel bounds
    int detector_id = 0;
};

struct DetectorParams {
    int id = 0;
    int min_area = 4;              // components smaller than this are dropped
    double color_threshold = 0.35; // max distance from the nearest palette color
};

struct DetectPalette {
    std::vector<Color> classes;
    Color background{};
};

/// The three synthetic detector variants standing in for the ensemble.
std::array<DetectorParams, 3> default_detectors();

DetectPalette palette_for_classes(int k);

/// Connected components (4-connectivity) of non-background pixels; each
/// component is classified by the nearest palette color of its confidently
/// foreground pixels and dropped when too small or too far off-palette.
std::vector<Detection> detect(const Image& image, const DetectPalette& palette,
                              const DetectorParams& params);

double box_iou(const Detection& a, const Detection& b);

/// Any-two voting: a detection survives only when matched (same class,
/// IoU >= threshold) by at least one other detector. Matching is greedy by
/// descending IoU and one-to-one per detector pair; matched groups are
/// deduplicated to a single kept detection.
std::vector<Detection> ensemble_filter(const std::array<std::vector<Detection>, 3>& per_detector,
                                       double iou_threshold);

struct BenchmarkPrompt {
    std::string id;
    PromptConfig prompt;
    int size_param = 0;  // k for multi-class, n for multi-instance
};

struct BenchmarkSuite {
    std::vector<BenchmarkPrompt> prompts;
    uint64_t seed = 0;
};

/// (# requested classes with a kept detection) / k * 100.
double multiclass_accuracy(const std::vector<Detection>& kept, const BenchmarkPrompt& prompt);
/// min(# kept detections of the class, n) / n * 100; surplus caps at 100.
double multiinstance_accuracy(const std::vector<Detection>& kept, const BenchmarkPrompt& prompt);

double accuracy_for_prompt(const std::vector<Detection>& kept, const BenchmarkPrompt& prompt);

/// Detect with the default ensemble and score one image against its prompt.
double evaluate_image(const Image& image, const BenchmarkPrompt& prompt);

struct Category {
    std::string name;
    std::vector<std::string> classes;
};

/// Small categories used for actual runs (distinct palette per class slot).
std::vector<Category> toy_categories();
/// The benchmark's category table at paper scale, for combinatorics only.
std::vector<Category> paper_scale_categories();

/// Number of k-subsets of the category, before fractional sampling.
long long combination_count(int category_size, int k);

/// multi-class: enumerate all C(|category|, k) class combinations per
/// category and keep ceil(fraction*count) of them, sampled with the seeded
/// generator. multi-instance: one prompt per class per n.
BenchmarkSuite build_benchmark(const std::vector<Category>& table, const std::string& kind,
                               int size_param, double fraction, uint64_t seed);

/// Merge helper preserving prompt order.
BenchmarkSuite merge_suites(const std::vector<BenchmarkSuite>& suites);

/// The 20-prompt synthetic suite used by the ablation harness: 10 multi-class
/// prompts (k = 2 and 3) and 10 multi-instance prompts (n = 2 and 3).
BenchmarkSuite default_synthetic_suite(uint64_t seed);

struct AblationConfigSpec {
    std::string id;
    RunConfig base;  // prompt field is substituted per suite entry
};

struct CellResult {
    std::string config_id;
    std::string prompt_id;
    std::string kind;
    int size_param = 0;
    uint64_t seed = 0;
    double accuracy = 0.0;
    bool failed = false;
    std::string error;
};

struct AggregateRow {
    std::string config_id;
    std::string kind;      // "multi-class" | "multi-instance" | "all"
    int size_param = -1;   // -1 aggregates over sizes
    double mean_accuracy = 0.0;
    int cells = 0;
    int failures = 0;
};

struct AblationResult {
    std::vector<CellResult> cells;       // config-major, then prompt, then seed
    std::vector<AggregateRow> aggregates;
};

/// Runs config × prompt × seed cells (optionally on a worker pool), scores
/// each decoded image, and aggregates per config. Failed cells are recorded
/// and excluded from the aggregates.
AblationResult ablation_run(const std::vector<AblationConfigSpec>& configs,
                            const BenchmarkSuite& suite, const std::vector<uint64_t>& seeds,
                            int jobs = 1);

double aggregate_accuracy(const AblationResult& result, const std::string& config_id,
                          const std::string& kind /* "all" for overall */);

std::string cells_csv(const AblationResult& result);
std::string aggregates_csv(const AblationResult& result);

}  // namespace isac
