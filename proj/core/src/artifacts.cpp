#include "isac/artifacts.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "isac/tensor_io.hpp"

namespace isac {

namespace {

std::string fmt(double v, const char* spec = "%.9f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

std::string join_ints(const std::vector<int>& xs, char sep) {
    std::vector<std::string> parts;
    for (int x : xs) parts.push_back(std::to_string(x));
    return join(parts, sep);
}

}  // namespace

std::string config_canonical(const RunConfig& cfg) {
    std::ostringstream s;
    s << "T=" << cfg.T << ";H=" << cfg.H << ";W=" << cfg.W << ";backend=" << cfg.backend_id
      << ";classes=" << join(cfg.prompt.classes, ',') << ";counts="
      << join_ints(cfg.prompt.counts, ',') << ";d=" << cfg.d << ";dumps="
      << join_ints(cfg.dump_timesteps, ',') << ";eta=" << fmt(cfg.eta, "%.9g")
      << ";kind=" << cfg.prompt.kind << ";loss=" << to_string(cfg.loss)
      << ";schedule=" << to_string(cfg.schedule) << ";seed=" << cfg.seed;
    return s.str();
}

std::string losses_csv(const RunRecord& rec) {
    std::string out = "t,lambda_ins,lambda_cls,L_ins,L_cls,L_total\n";
    for (const LossReport& r : rec.reports) {
        out += std::to_string(r.t);
        out += ',' + fmt(r.lambda_ins) + ',' + fmt(r.lambda_cls) + ',' + fmt(r.loss_ins) + ',' +
               fmt(r.loss_cls) + ',' + fmt(r.loss_total) + '\n';
    }
    return out;
}

std::string ground_truth_text(const SceneSpec& gt) {
    std::string out;
    out += "instances=" + std::to_string(gt.instances.size()) + "\n";
    out += "classes=" + std::to_string(gt.palette.size()) + "\n";
    for (size_t i = 0; i < gt.instances.size(); ++i) {
        const SceneInstance& b = gt.instances[i];
        out += "instance=" + std::to_string(i) + " class=" + std::to_string(b.class_index) +
               " cx=" + fmt(b.cx) + " cy=" + fmt(b.cy) + " radius=" + fmt(b.radius) + "\n";
    }
    return out;
}

SceneSpec parse_ground_truth(const std::string& text) {
    SceneSpec gt;
    gt.background = scene_background();
    std::istringstream ss(text);
    std::string line;
    int classes = 0;
    while (std::getline(ss, line)) {
        if (line.rfind("classes=", 0) == 0) {
            classes = std::stoi(line.substr(8));
        } else if (line.rfind("instance=", 0) == 0) {
            SceneInstance b;
            int idx = 0;
            if (std::sscanf(line.c_str(), "instance=%d class=%d cx=%lf cy=%lf radius=%lf", &idx,
                            &b.class_index, &b.cx, &b.cy, &b.radius) != 5)
                throw ConfigError("ground truth: malformed line: " + line);
            gt.instances.push_back(b);
        }
    }
    for (int c = 0; c < classes; ++c) gt.palette.push_back(class_color(c));
    return gt;
}

void write_manifest(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    atomic_write_file(path, out);
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(read_file(path));
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("manifest: malformed line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void write_run_artifacts(const RunConfig& cfg, const RunRecord& rec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string csv = losses_csv(rec);
    atomic_write_file(out_dir + "/losses.csv", csv);
    const std::string ppm = ppm_bytes(rec.image);
    atomic_write_file(out_dir + "/image.ppm", ppm);
    if (rec.ground_truth)
        atomic_write_file(out_dir + "/gt.txt", ground_truth_text(*rec.ground_truth));

    for (const StepDump& d : rec.dumps) {
        const std::string suffix = "_" + std::to_string(d.t) + ".tnsr";
        write_tensor(out_dir + "/sa" + suffix, tensor_from_mat(d.sa));
        write_tensor(out_dir + "/ca" + suffix, tensor_from_mat(d.ca));
        write_tensor(out_dir + "/caprop" + suffix, tensor_from_mat(d.ca_prop));
        write_tensor(out_dir + "/cabin" + suffix, tensor_from_mat(d.ca_bin));
        write_tensor(out_dir + "/mfg" + suffix, tensor_from_vec(d.foreground));
        for (size_t i = 0; i < d.masks.size(); ++i)
            write_tensor(out_dir + "/mask" + std::to_string(i) + suffix,
                         tensor_from_vec(d.masks[i]));
    }

    std::map<std::string, std::string> kv;
    kv["backend"] = cfg.backend_id;
    kv["T"] = std::to_string(cfg.T);
    kv["H"] = std::to_string(cfg.H);
    kv["W"] = std::to_string(cfg.W);
    kv["d"] = std::to_string(cfg.d);
    kv["eta"] = fmt(cfg.eta, "%.9g");
    kv["schedule"] = to_string(cfg.schedule);
    kv["loss"] = to_string(cfg.loss);
    kv["seed"] = std::to_string(cfg.seed);
    kv["prompt.kind"] = cfg.prompt.kind;
    {
        std::string cls, cnt;
        for (size_t i = 0; i < cfg.prompt.classes.size(); ++i) {
            if (i) {
                cls += ',';
                cnt += ',';
            }
            cls += cfg.prompt.classes[i];
            cnt += std::to_string(cfg.prompt.counts[i]);
        }
        kv["prompt.classes"] = cls;
        kv["prompt.counts"] = cnt;
    }
    kv["prompt.text"] = cfg.prompt.render_text();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(config_canonical(cfg)));
    kv["config_hash"] = buf;
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(csv.data(), csv.size()));
    kv["losses_hash"] = buf;
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(ppm.data(), ppm.size()));
    kv["image_hash"] = buf;
    write_manifest(out_dir + "/manifest.txt", kv);
}

}  // namespace isac
