#include "tmgan/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "tmgan/common.hpp"

namespace tmgan {

namespace {

std::string trimmed(const std::string& s) {
    const char* ws = " \t\r";
    const auto begin = s.find_first_not_of(ws);
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& v, const char* key) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: key '" + std::string(key) + "' needs a number, got '" + v + "'");
    return out;
}

int parse_int(const std::string& v, const char* key) {
    int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: key '" + std::string(key) + "' needs an integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& v, const char* key) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: key '" + std::string(key) + "' needs an unsigned integer, got '" +
                          v + "'");
    return out;
}

bool parse_bool(const std::string& v, const char* key) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigError("config: key '" + std::string(key) + "' needs 0/1/true/false, got '" + v + "'");
}

struct KeyEntry {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define KEY_DOUBLE(field)                                                            \
    KeyEntry{#field,                                                                 \
             [](RunConfig& c, const std::string& v) { c.field = parse_double(v, #field); }, \
             [](const RunConfig& c) { return format_number(c.field); }}
#define KEY_INT(field)                                                               \
    KeyEntry{#field,                                                                 \
             [](RunConfig& c, const std::string& v) { c.field = parse_int(v, #field); }, \
             [](const RunConfig& c) {                                                \
                 return format_number(static_cast<std::int64_t>(c.field));           \
             }}
#define KEY_U64(field)                                                               \
    KeyEntry{#field,                                                                 \
             [](RunConfig& c, const std::string& v) { c.field = parse_u64(v, #field); }, \
             [](const RunConfig& c) { return std::to_string(c.field); }}
#define KEY_BOOL(field)                                                              \
    KeyEntry{#field,                                                                 \
             [](RunConfig& c, const std::string& v) { c.field = parse_bool(v, #field); }, \
             [](const RunConfig& c) { return std::string(c.field ? "1" : "0"); }}
#define KEY_STRING(field)                                                            \
    KeyEntry{#field, [](RunConfig& c, const std::string& v) { c.field = v; },        \
             [](const RunConfig& c) { return c.field; }}

const std::vector<KeyEntry>& key_table() {
    static const std::vector<KeyEntry> table = {
        KEY_DOUBLE(lambda),
        KEY_DOUBLE(sigma_hu),
        KEY_DOUBLE(alpha),
        KEY_BOOL(saturating_adversarial),
        KEY_DOUBLE(eta),
        KEY_DOUBLE(threshold_d),
        KEY_INT(max_disc_updates),
        KEY_INT(total_updates),
        KEY_DOUBLE(lr_gen),
        KEY_DOUBLE(lr_disc),
        KEY_INT(batch_size),
        KEY_U64(seed),
        KeyEntry{"precision",
                 [](RunConfig& c, const std::string& v) {
                     try {
                         c.precision = precision_from_name(v);
                     } catch (const Error& e) {
                         throw ConfigError(std::string("config: ") + e.what());
                     }
                 },
                 [](const RunConfig& c) { return std::string(precision_name(c.precision)); }},
        KEY_STRING(target_kind),
        KEY_DOUBLE(target_std),
        KEY_DOUBLE(target_sigma_px),
        KEY_DOUBLE(target_sigma_narrow_px),
        KEY_DOUBLE(target_sigma_wide_px),
        KEY_U64(target_seed),
        KEY_INT(arch_depth),
        KEY_INT(arch_width),
        KEY_BOOL(arch_batch_norm),
        KEY_BOOL(gamma_learnable),
        KEY_INT(phantom_count),
        KEY_INT(phantom_h),
        KEY_INT(phantom_w),
        KEY_INT(n_shapes),
        KEY_DOUBLE(dy_mm),
        KEY_DOUBLE(dx_mm),
        KEY_INT(patch_size),
        KEY_INT(pairs_per_phantom),
        KEY_DOUBLE(split_fraction),
        KEY_STRING(noise_kind),
        KEY_DOUBLE(noise_std),
        KEY_DOUBLE(noise_sigma_px),
        KEY_DOUBLE(noise_sigma_narrow_px),
        KEY_DOUBLE(noise_sigma_wide_px),
        KEY_U64(noise_seed),
        KEY_U64(data_seed),
        KEY_STRING(deform_mode),
        KEY_DOUBLE(deform_sigma_mm),
    };
    return table;
}

#undef KEY_DOUBLE
#undef KEY_INT
#undef KEY_U64
#undef KEY_BOOL
#undef KEY_STRING

TextureSpec texture_from(const std::string& kind, double std_hu, double sigma_px,
                         double sigma_narrow_px, double sigma_wide_px, std::uint64_t seed,
                         const char* which) {
    if (kind == "white") return TextureSpec::white(std_hu, seed);
    if (kind == "low_pass") return TextureSpec::low_pass(std_hu, sigma_px, seed);
    if (kind == "band_pass")
        return TextureSpec::band_pass(std_hu, sigma_narrow_px, sigma_wide_px, seed);
    throw ConfigError("config: " + std::string(which) +
                      " must be white, low_pass, or band_pass, got '" + kind + "'");
}

}  // namespace

TextureSpec RunConfig::target() const {
    return texture_from(target_kind, target_std, target_sigma_px, target_sigma_narrow_px,
                        target_sigma_wide_px, target_seed, "target_kind");
}

TextureSpec RunConfig::noise() const {
    return texture_from(noise_kind, noise_std, noise_sigma_px, noise_sigma_narrow_px,
                        noise_sigma_wide_px, noise_seed, "noise_kind");
}

DeformationSpec RunConfig::deform() const {
    if (deform_mode == "identity") return DeformationSpec::identity();
    if (deform_mode == "gaussian_blur") return DeformationSpec::blur(deform_sigma_mm);
    throw ConfigError("config: deform_mode must be identity or gaussian_blur, got '" + deform_mode +
                      "'");
}

GeneratorArch RunConfig::arch() const { return {arch_depth, arch_width, arch_batch_norm}; }

DatasetConfig RunConfig::dataset() const {
    DatasetConfig d;
    d.phantom_count = phantom_count;
    d.phantom_h = phantom_h;
    d.phantom_w = phantom_w;
    d.n_shapes = n_shapes;
    d.dy_mm = dy_mm;
    d.dx_mm = dx_mm;
    d.patch_size = patch_size;
    d.pairs_per_phantom = pairs_per_phantom;
    d.split_fraction = split_fraction;
    d.deform = deform();
    d.noise = noise();
    d.seed = data_seed;
    return d;
}

TrainConfig RunConfig::train() const {
    TrainConfig t;
    t.loss.lambda = lambda;
    t.loss.sigma_hu = sigma_hu;
    t.loss.alpha = alpha;
    t.loss.saturating_adversarial = saturating_adversarial;
    t.eta = eta;
    t.threshold_d = threshold_d;
    t.max_disc_updates = max_disc_updates;
    t.total_updates = total_updates;
    t.lr_gen = lr_gen;
    t.lr_disc = lr_disc;
    t.batch_size = batch_size;
    t.seed = seed;
    t.precision = precision;
    t.target = target();
    return t;
}

void RunConfig::validate() const {
    // Any range violation from the assembled sub-configs is a usage
    // problem, so it is rethrown under the config error type.
    try {
        train().validate();
        target().validate();
        arch().validate();
        dataset().validate();
        // Texture draws happen at patch size during training, so the
        // correlation taps must fit inside a patch.
        for (const auto& [label, spec] : {std::pair{"target", target()}, {"noise", noise()}})
            require(spec.taps.dim(0) <= patch_size && spec.taps.dim(1) <= patch_size,
                    std::string("config: ") + label + " texture taps (" +
                        std::to_string(spec.taps.dim(0)) + "x" + std::to_string(spec.taps.dim(1)) +
                        ") do not fit in a " + std::to_string(patch_size) + "-pixel patch");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::string RunConfig::render() const {
    std::string out;
    for (const KeyEntry& entry : key_table()) {
        out += entry.name;
        out += " = ";
        out += entry.get(*this);
        out += '\n';
    }
    return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const KeyEntry& entry : key_table()) {
        if (key == entry.name) {
            entry.set(*this, value);
            return;
        }
    }
    throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trimmed(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not 'key = value': '" + line + "'");
        const std::string key = trimmed(line.substr(0, eq));
        const std::string value = trimmed(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: line " + std::to_string(lineno) + " has an empty key");
        if (!seen.insert(key).second)
            throw ConfigError("config: duplicate key '" + key + "' on line " +
                              std::to_string(lineno));
        cfg.set(key, value);
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw ConfigError("config: cannot open '" + path + "'");
    std::string text{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    return parse(text);
}

std::vector<std::string> run_config_keys() {
    std::vector<std::string> out;
    for (const KeyEntry& entry : key_table()) out.emplace_back(entry.name);
    return out;
}

}  // namespace tmgan
