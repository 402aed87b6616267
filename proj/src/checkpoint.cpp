#include "ecgnn/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ecgnn/errors.hpp"
#include "ecgnn/tensor_io.hpp"

using nlohmann::json;

namespace ecgnn {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'C'};

json config_json(const ModelConfig& c) {
    return json{{"d_c", c.d_c},
                {"d_v", c.d_v},
                {"d_q", c.d_q},
                {"d_a", c.d_a},
                {"d_m", c.d_m},
                {"vocab", c.vocab},
                {"d", c.d},
                {"layers", c.layers},
                {"cmr_after", c.cmr_after},
                {"n_r", c.n_r},
                {"task", task_name(c.task)},
                {"n_classes", c.n_classes},
                {"n_candidates", c.n_candidates},
                {"use_caption", c.use_caption},
                {"use_video", c.use_video},
                {"use_cmr", c.use_cmr},
                {"use_qmmf", c.use_qmmf},
                {"question_guided", c.question_guided},
                {"seed", c.seed},
                {"ln_eps", c.ln_eps}};
}

ModelConfig config_from(const json& j) {
    ModelConfig c;
    c.d_c = j.value("d_c", c.d_c);
    c.d_v = j.value("d_v", c.d_v);
    c.d_q = j.value("d_q", c.d_q);
    c.d_a = j.value("d_a", c.d_a);
    c.d_m = j.value("d_m", c.d_m);
    c.vocab = j.value("vocab", c.vocab);
    c.d = j.value("d", c.d);
    c.layers = j.value("layers", c.layers);
    if (j.contains("cmr_after")) c.cmr_after = j.at("cmr_after").get<std::vector<std::size_t>>();
    c.n_r = j.value("n_r", c.n_r);
    if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
    c.n_classes = j.value("n_classes", c.n_classes);
    c.n_candidates = j.value("n_candidates", c.n_candidates);
    c.use_caption = j.value("use_caption", c.use_caption);
    c.use_video = j.value("use_video", c.use_video);
    c.use_cmr = j.value("use_cmr", c.use_cmr);
    c.use_qmmf = j.value("use_qmmf", c.use_qmmf);
    c.question_guided = j.value("question_guided", c.question_guided);
    c.seed = j.value("seed", c.seed);
    c.ln_eps = j.value("ln_eps", c.ln_eps);
    return c;
}

}  // namespace

std::string config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(2); }

ModelConfig config_from_json(const std::string& text) {
    try {
        return config_from(json::parse(text));
    } catch (const json::exception& e) {
        throw FormatError("config: malformed JSON: " + std::string(e.what()));
    }
}

void save_checkpoint(const std::string& path, const Model& model) {
    namespace fs = std::filesystem;
    const fs::path tmp = fs::path(path).string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw FormatError("checkpoint: cannot open '" + tmp.string() + "' for writing");
        os.write(kMagic, 4);
        const std::uint32_t version = 1;
        os.write(reinterpret_cast<const char*>(&version), 4);
        const std::string cfg = config_to_json(model.config());
        const std::uint64_t clen = cfg.size();
        os.write(reinterpret_cast<const char*>(&clen), 8);
        os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
        const std::uint32_t n = static_cast<std::uint32_t>(model.params().size());
        os.write(reinterpret_cast<const char*>(&n), 4);
        for (const Param* p : model.params()) {
            const std::uint32_t nl = static_cast<std::uint32_t>(p->name.size());
            os.write(reinterpret_cast<const char*>(&nl), 4);
            os.write(p->name.data(), nl);
            write_tensor_record(os, p->value, 2);
        }
        if (!os) throw FormatError("checkpoint: write failed");
    }
    fs::rename(tmp, path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open '" + path + "'");
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (!is || version != 1) throw FormatError("checkpoint: unsupported version");
    std::uint64_t clen = 0;
    is.read(reinterpret_cast<char*>(&clen), 8);
    if (!is || clen > (1ull << 20)) throw FormatError("checkpoint: bad config length");
    std::string cfg_text(clen, '\0');
    is.read(cfg_text.data(), static_cast<std::streamsize>(clen));
    if (!is) throw FormatError("checkpoint: truncated config");

    auto model = std::make_unique<Model>(config_from_json(cfg_text));

    std::uint32_t n = 0;
    is.read(reinterpret_cast<char*>(&n), 4);
    if (!is) throw FormatError("checkpoint: truncated parameter count");
    if (n != model->params().size()) {
        throw FormatError("checkpoint: parameter count " + std::to_string(n) + " vs model registry " +
                          std::to_string(model->params().size()));
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t nl = 0;
        is.read(reinterpret_cast<char*>(&nl), 4);
        if (!is || nl > 4096) throw FormatError("checkpoint: bad parameter name length");
        std::string name(nl, '\0');
        is.read(name.data(), nl);
        if (!is) throw FormatError("checkpoint: truncated parameter name");
        Tensor value = read_tensor_record(is);
        Param* p = model->find_param(name);
        if (!p) throw FormatError("checkpoint: unknown parameter '" + name + "'");
        if (!p->value.same_shape(value)) {
            throw FormatError("checkpoint: parameter '" + name + "' shape " + shape_str(value.shape()) +
                              " vs model " + shape_str(p->value.shape()));
        }
        p->value = std::move(value);
    }
    return model;
}

}  // namespace ecgnn
