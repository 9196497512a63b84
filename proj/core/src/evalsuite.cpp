#include "isac/evalsuite.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "isac/rng.hpp"

namespace isac {

namespace {

constexpr double kBackgroundTolerance = 0.12;  // foreground = farther than this from bg

}  // namespace

std::array<DetectorParams, 3> default_detectors() {
    return {DetectorParams{0, 4, 0.35}, DetectorParams{1, 9, 0.25}, DetectorParams{2, 16, 0.15}};
}

DetectPalette palette_for_classes(int k) {
    DetectPalette p;
    p.background = scene_background();
    for (int c = 0; c < k; ++c) p.classes.push_back(class_color(c));
    return p;
}

std::vector<Detection> detect(const Image& image, const DetectPalette& palette,
                              const DetectorParams& params) {
    if (palette.classes.empty()) throw ConfigError("detect: empty palette");
    const int h = image.H, w = image.W;
    std::vector<int> label(static_cast<size_t>(h) * w, -1);
    std::vector<double> bg_dist(static_cast<size_t>(h) * w, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            bg_dist[static_cast<size_t>(r) * w + c] =
                color_distance(image.pixel(r, c), palette.background);

    std::vector<Detection> out;
    std::vector<int> stack;
    int next = 0;
    for (int r0 = 0; r0 < h; ++r0) {
        for (int c0 = 0; c0 < w; ++c0) {
            const int p0 = r0 * w + c0;
            if (label[p0] >= 0 || bg_dist[p0] <= kBackgroundTolerance) continue;
            // flood fill, 4-connectivity
            const int comp = next++;
            label[p0] = comp;
            stack.assign(1, p0);
            std::vector<int> pixels;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                pixels.push_back(p);
                const int r = p / w, c = p % w;
                const int nbr[4] = {p - w, p + w, p - 1, p + 1};
                const bool ok[4] = {r > 0, r + 1 < h, c > 0, c + 1 < w};
                for (int i = 0; i < 4; ++i) {
                    if (!ok[i]) continue;
                    const int q = nbr[i];
                    if (label[q] < 0 && bg_dist[q] > kBackgroundTolerance) {
                        label[q] = comp;
                        stack.push_back(q);
                    }
                }
            }
            if (static_cast<int>(pixels.size()) < params.min_area) continue;

            // classify on the confidently-foreground interior
            double peak = 0.0;
            for (int p : pixels) peak = std::max(peak, bg_dist[p]);
            Color mean{0.0, 0.0, 0.0};
            int count = 0;
            for (int p : pixels) {
                if (bg_dist[p] < 0.5 * peak) continue;
                const Color col = image.pixel(p / w, p % w);
                for (int ch = 0; ch < 3; ++ch) mean[ch] += col[ch];
                ++count;
            }
            for (int ch = 0; ch < 3; ++ch) mean[ch] /= std::max(count, 1);
            int cls = 0;
            double best = color_distance(mean, palette.classes[0]);
            for (size_t i = 1; i < palette.classes.size(); ++i) {
                const double d = color_distance(mean, palette.classes[i]);
                if (d < best) {
                    best = d;
                    cls = static_cast<int>(i);
                }
            }
            if (best > params.color_threshold) continue;

            Detection det;
            det.class_index = cls;
            det.detector_id = params.id;
            int rmin = h, rmax = -1, cmin = w, cmax = -1;
            for (int p : pixels) {
                rmin = std::min(rmin, p / w);
                rmax = std::max(rmax, p / w);
                cmin = std::min(cmin, p % w);
                cmax = std::max(cmax, p % w);
            }
            det.x0 = cmin;
            det.x1 = cmax + 1;
            det.y0 = rmin;
            det.y1 = rmax + 1;
            out.push_back(det);
        }
    }
    return out;
}

double box_iou(const Detection& a, const Detection& b) {
    const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = ix * iy;
    const double area_a = (a.x1 - a.x0) * (a.y1 - a.y0);
    const double area_b = (b.x1 - b.x0) * (b.y1 - b.y0);
    const double uni = area_a + area_b - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

std::vector<Detection> ensemble_filter(const std::array<std::vector<Detection>, 3>& per_detector,
                                       double iou_threshold) {
    // global index per detection
    std::vector<std::pair<int, int>> ids;  // (detector, position)
    std::vector<int> offset(4, 0);
    for (int d = 0; d < 3; ++d) {
        offset[d + 1] = offset[d] + static_cast<int>(per_detector[d].size());
        for (size_t i = 0; i < per_detector[d].size(); ++i)
            ids.emplace_back(d, static_cast<int>(i));
    }
    const int n = offset[3];
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<bool> matched(n, false);

    struct Cand {
        double iou;
        int gi, gj;
    };
    for (int da = 0; da < 3; ++da) {
        for (int db = da + 1; db < 3; ++db) {
            std::vector<Cand> cands;
            for (size_t i = 0; i < per_detector[da].size(); ++i) {
                for (size_t j = 0; j < per_detector[db].size(); ++j) {
                    const Detection& a = per_detector[da][i];
                    const Detection& b = per_detector[db][j];
                    if (a.class_index != b.class_index) continue;
                    const double iou = box_iou(a, b);
                    if (iou >= iou_threshold)
                        cands.push_back({iou, offset[da] + static_cast<int>(i),
                                         offset[db] + static_cast<int>(j)});
                }
            }
            std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
                if (x.iou != y.iou) return x.iou > y.iou;
                if (x.gi != y.gi) return x.gi < y.gi;
                return x.gj < y.gj;
            });
            std::vector<bool> used_a(per_detector[da].size(), false);
            std::vector<bool> used_b(per_detector[db].size(), false);
            for (const Cand& c : cands) {
                const int ia = c.gi - offset[da];
                const int ib = c.gj - offset[db];
                if (used_a[ia] || used_b[ib]) continue;  // one-to-one per pair
                used_a[ia] = used_b[ib] = true;
                matched[c.gi] = matched[c.gj] = true;
                parent[find(c.gi)] = find(c.gj);
            }
        }
    }

    // one kept detection per matched group: the lowest (detector, position)
    std::vector<int> rep(n, -1);
    std::vector<Detection> kept;
    for (int i = 0; i < n; ++i) {
        if (!matched[i]) continue;
        const int root = find(i);
        if (rep[root] < 0) {
            rep[root] = i;
            kept.push_back(per_detector[ids[i].first][ids[i].second]);
        }
    }
    return kept;
}

double multiclass_accuracy(const std::vector<Detection>& kept, const BenchmarkPrompt& prompt) {
    if (prompt.prompt.kind != "multi-class")
        throw ConfigError("multiclass_accuracy: prompt kind mismatch");
    const int k = static_cast<int>(prompt.prompt.classes.size());
    int hit = 0;
    for (int c = 0; c < k; ++c) {
        for (const Detection& d : kept) {
            if (d.class_index == c) {
                ++hit;
                break;
            }
        }
    }
    return 100.0 * hit / k;
}

double multiinstance_accuracy(const std::vector<Detection>& kept, const BenchmarkPrompt& prompt) {
    if (prompt.prompt.kind != "multi-instance")
        throw ConfigError("multiinstance_accuracy: prompt kind mismatch");
    const int n = prompt.prompt.counts[0];
    int count = 0;
    for (const Detection& d : kept)
        if (d.class_index == 0) ++count;
    return 100.0 * std::min(count, n) / n;
}

double accuracy_for_prompt(const std::vector<Detection>& kept, const BenchmarkPrompt& prompt) {
    return prompt.prompt.kind == "multi-class" ? multiclass_accuracy(kept, prompt)
                                               : multiinstance_accuracy(kept, prompt);
}

double evaluate_image(const Image& image, const BenchmarkPrompt& prompt) {
    const DetectPalette palette =
        palette_for_classes(static_cast<int>(prompt.prompt.classes.size()));
    const auto detectors = default_detectors();
    std::array<std::vector<Detection>, 3> lists;
    for (int i = 0; i < 3; ++i) lists[i] = detect(image, palette, detectors[i]);
    const std::vector<Detection> kept = ensemble_filter(lists, 0.5);
    return accuracy_for_prompt(kept, prompt);
}

std::vector<Category> toy_categories() {
    return {{"critters", {"cat", "dog", "owl", "hen", "pig"}},
            {"rides", {"car", "van", "jet", "cab", "tram"}}};
}

std::vector<Category> paper_scale_categories() {
    return {{"animal", {"cat", "dog", "horse", "sheep", "cow", "elephant", "bear", "zebra",
                        "giraffe"}},
            {"vehicle", {"bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck",
                         "boat"}},
            {"sports", {"skateboard", "snowboard", "skis", "sports ball", "baseball bat",
                        "baseball glove", "tennis racket", "surfboard", "kite", "frisbee"}},
            {"food", {"banana", "apple", "sandwich", "orange", "broccoli", "carrot", "hot dog",
                      "pizza", "donut", "cake"}}};
}

long long combination_count(int category_size, int k) {
    if (k < 0 || k > category_size) return 0;
    long long c = 1;
    for (int i = 1; i <= k; ++i) c = c * (category_size - k + i) / i;
    return c;
}

BenchmarkSuite build_benchmark(const std::vector<Category>& table, const std::string& kind,
                               int size_param, double fraction, uint64_t seed) {
    if (table.empty()) throw ConfigError("build_benchmark: empty category table");
    if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("build_benchmark: fraction outside (0,1]");
    BenchmarkSuite suite;
    suite.seed = seed;
    if (kind == "multi-class") {
        if (size_param < 2) throw ConfigError("build_benchmark: multi-class needs k >= 2");
        for (const Category& cat : table) {
            const int sz = static_cast<int>(cat.classes.size());
            if (size_param > sz)
                throw ConfigError("build_benchmark: k exceeds category size for " + cat.name);
            // enumerate k-subsets in lexicographic order
            std::vector<std::vector<int>> combos;
            std::vector<int> idx(size_param);
            for (int i = 0; i < size_param; ++i) idx[i] = i;
            while (true) {
                combos.push_back(idx);
                int i = size_param - 1;
                while (i >= 0 && idx[i] == sz - size_param + i) --i;
                if (i < 0) break;
                ++idx[i];
                for (int j = i + 1; j < size_param; ++j) idx[j] = idx[j - 1] + 1;
            }
            const int count = static_cast<int>(combos.size());
            const int take = static_cast<int>(std::ceil(fraction * count));
            std::vector<int> order(count);
            for (int i = 0; i < count; ++i) order[i] = i;
            Rng rng(derive_seed(seed, cat.name, static_cast<uint64_t>(size_param)));
            for (int i = 0; i < take; ++i) {
                const int j = i + rng.uniform_int(count - i);
                std::swap(order[i], order[j]);
            }
            std::vector<int> chosen(order.begin(), order.begin() + take);
            std::sort(chosen.begin(), chosen.end());
            for (int ci : chosen) {
                BenchmarkPrompt p;
                p.prompt.kind = "multi-class";
                for (int j : combos[ci]) {
                    p.prompt.classes.push_back(cat.classes[j]);
                    p.prompt.counts.push_back(1);
                }
                p.size_param = size_param;
                p.id = "mc-" + cat.name + "-k" + std::to_string(size_param) + "-" +
                       std::to_string(ci);
                suite.prompts.push_back(std::move(p));
            }
        }
    } else if (kind == "multi-instance") {
        if (size_param < 2) throw ConfigError("build_benchmark: multi-instance needs n >= 2");
        for (const Category& cat : table) {
            for (const std::string& cls : cat.classes) {
                BenchmarkPrompt p;
                p.prompt.kind = "multi-instance";
                p.prompt.classes = {cls};
                p.prompt.counts = {size_param};
                p.size_param = size_param;
                p.id = "mi-" + cat.name + "-n" + std::to_string(size_param) + "-" + cls;
                suite.prompts.push_back(std::move(p));
            }
        }
    } else {
        throw ConfigError("build_benchmark: unknown kind: " + kind);
    }
    return suite;
}

BenchmarkSuite merge_suites(const std::vector<BenchmarkSuite>& suites) {
    BenchmarkSuite out;
    for (const auto& s : suites) {
        if (out.prompts.empty()) out.seed = s.seed;
        out.prompts.insert(out.prompts.end(), s.prompts.begin(), s.prompts.end());
    }
    return out;
}

BenchmarkSuite default_synthetic_suite(uint64_t seed) {
    const std::vector<Category> cats = toy_categories();
    const std::vector<Category> critters = {cats[0]};
    const std::vector<Category> rides = {cats[1]};
    return merge_suites({
        build_benchmark(critters, "multi-class", 2, 0.6, derive_seed(seed, "mc2")),
        build_benchmark(critters, "multi-class", 3, 0.4, derive_seed(seed, "mc3")),
        build_benchmark(rides, "multi-instance", 2, 1.0, derive_seed(seed, "mi2")),
        build_benchmark(rides, "multi-instance", 3, 1.0, derive_seed(seed, "mi3")),
    });
}

AblationResult ablation_run(const std::vector<AblationConfigSpec>& configs,
                            const BenchmarkSuite& suite, const std::vector<uint64_t>& seeds,
                            int jobs) {
    if (configs.empty() || suite.prompts.empty() || seeds.empty())
        throw ConfigError("ablation_run: configs, suite and seeds must be non-empty");
    const size_t total = configs.size() * suite.prompts.size() * seeds.size();
    AblationResult result;
    result.cells.resize(total);

    auto run_cell = [&](size_t cell) {
        const size_t per_config = suite.prompts.size() * seeds.size();
        const size_t ci = cell / per_config;
        const size_t pi = (cell % per_config) / seeds.size();
        const size_t si = cell % seeds.size();
        const BenchmarkPrompt& bp = suite.prompts[pi];
        CellResult& out = result.cells[cell];
        out.config_id = configs[ci].id;
        out.prompt_id = bp.id;
        out.kind = bp.prompt.kind;
        out.size_param = bp.size_param;
        // same (prompt, seed) shares the trajectory noise across configs so
        // config comparisons are paired
        out.seed = derive_seed(seeds[si], bp.id);
        try {
            RunConfig rc = configs[ci].base;
            rc.prompt = bp.prompt;
            const RunRecord rec = run(rc, out.seed);
            out.accuracy = evaluate_image(rec.image, bp);
        } catch (const std::exception& e) {
            out.failed = true;
            out.error = e.what();
        }
    };

    if (jobs <= 1) {
        for (size_t cell = 0; cell < total; ++cell) run_cell(cell);
    } else {
        std::atomic<size_t> next{0};
        const int workers = static_cast<int>(std::min<size_t>(jobs, total));
        std::vector<std::thread> pool;
        for (int wkr = 0; wkr < workers; ++wkr) {
            pool.emplace_back([&] {
                for (size_t cell = next.fetch_add(1); cell < total; cell = next.fetch_add(1))
                    run_cell(cell);
            });
        }
        for (auto& th : pool) th.join();
    }

    // aggregates: per config overall, per kind, per (kind, size)
    for (const auto& cfg : configs) {
        struct Acc {
            double sum = 0.0;
            int n = 0, fail = 0;
        };
        Acc overall;
        std::vector<std::pair<std::pair<std::string, int>, Acc>> groups;
        auto group = [&](const std::string& kind, int size) -> Acc& {
            for (auto& g : groups)
                if (g.first.first == kind && g.first.second == size) return g.second;
            groups.push_back({{kind, size}, Acc{}});
            return groups.back().second;
        };
        for (const CellResult& c : result.cells) {
            if (c.config_id != cfg.id) continue;
            Acc* accs[3] = {&overall, &group(c.kind, -1), &group(c.kind, c.size_param)};
            for (Acc* a : accs) {
                if (c.failed) {
                    ++a->fail;
                } else {
                    a->sum += c.accuracy;
                    ++a->n;
                }
            }
        }
        auto emit = [&](const std::string& kind, int size, const Acc& a) {
            AggregateRow row;
            row.config_id = cfg.id;
            row.kind = kind;
            row.size_param = size;
            row.cells = a.n;
            row.failures = a.fail;
            row.mean_accuracy = a.n ? a.sum / a.n : 0.0;
            result.aggregates.push_back(row);
        };
        emit("all", -1, overall);
        std::sort(groups.begin(), groups.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        for (const auto& g : groups) emit(g.first.first, g.first.second, g.second);
    }
    return result;
}

double aggregate_accuracy(const AblationResult& result, const std::string& config_id,
                          const std::string& kind) {
    for (const AggregateRow& row : result.aggregates)
        if (row.config_id == config_id && row.kind == kind && row.size_param == -1)
            return row.mean_accuracy;
    throw ConfigError("aggregate_accuracy: no such aggregate: " + config_id + "/" + kind);
}

namespace {

std::string fmt_acc(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string cells_csv(const AblationResult& result) {
    std::string out = "config_id,prompt_id,seed,kind,size_param,accuracy,failed,error\n";
    for (const CellResult& c : result.cells) {
        out += c.config_id + "," + c.prompt_id + "," + std::to_string(c.seed) + "," + c.kind +
               "," + std::to_string(c.size_param) + "," + fmt_acc(c.accuracy) + "," +
               (c.failed ? "1" : "0") + "," + c.error + "\n";
    }
    return out;
}

std::string aggregates_csv(const AblationResult& result) {
    std::string out = "config_id,kind,size_param,mean_accuracy,cells,failures\n";
    for (const AggregateRow& r : result.aggregates) {
        out += r.config_id + "," + r.kind + "," + std::to_string(r.size_param) + "," +
               fmt_acc(r.mean_accuracy) + "," + std::to_string(r.cells) + "," +
               std::to_string(r.failures) + "\n";
    }
    return out;
}

}  // namespace isac
