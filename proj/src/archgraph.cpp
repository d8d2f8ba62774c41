#include "lowlat/archgraph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lowlat/error.hpp"
#include "lowlat/pqmf.hpp"

namespace lowlat {

namespace {

struct Interval {
    int64_t lo, hi;
};

int64_t floor_div(int64_t a, int64_t b)
{
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

int64_t ceil_div(int64_t a, int64_t b) { return -floor_div(-a, b); }

std::string where(const char* part, size_t i) { return std::string(part) + "[" + std::to_string(i) + "]"; }

void check_layer(const LayerSpec& l, const std::string& at)
{
    if (l.kernel < 1)
        throw ValidationError(at + ": kernel_length must be >= 1");
    if (l.stride < 1)
        throw ValidationError(at + ": stride must be >= 1");
    if (l.channels_in < 1 || l.channels_out < 1)
        throw ValidationError(at + ": channels must be positive");
    if (l.lookahead < 0)
        throw ValidationError(at + ": lookahead must be non-negative");
    for (int d : l.dilations)
        if (d < 1)
            throw ValidationError(at + ": dilations must be positive");
    switch (l.kind) {
    case LayerKind::Conv:
        if (l.dilations.size() > 1)
            throw ValidationError(at + ": conv takes at most one dilation");
        if (l.lookahead >= l.kernel)
            throw ValidationError(at + ": lookahead must be < kernel_length");
        break;
    case LayerKind::TransposedConv:
        if (l.lookahead >= l.kernel)
            throw ValidationError(at + ": lookahead must be < kernel_length");
        if (!l.dilations.empty())
            throw ValidationError(at + ": transposed-conv takes no dilations");
        break;
    case LayerKind::ResidualStack:
        if (l.dilations.empty())
            throw ValidationError(at + ": residual-stack needs a non-empty dilations list");
        if (l.lookahead >= l.kernel)
            throw ValidationError(at + ": lookahead must be < kernel_length");
        if (l.stride != 1)
            throw ValidationError(at + ": residual-stack stride must be 1");
        if (l.channels_in != l.channels_out)
            throw ValidationError(at + ": residual-stack must preserve channels");
        break;
    case LayerKind::Activation:
        if (l.channels_in != l.channels_out)
            throw ValidationError(at + ": activation must preserve channels");
        if (l.stride != 1 || l.lookahead != 0)
            throw ValidationError(at + ": activation has no stride or lookahead");
        break;
    }
}

Interval back_conv(Interval o, const LayerSpec& l)
{
    const int64_t span = int64_t(l.kernel - 1) * l.dilation();
    return {o.lo * l.stride + l.lookahead - span, o.hi * l.stride + l.lookahead};
}

Interval back_tconv(Interval o, const LayerSpec& l)
{
    return {ceil_div(o.lo - l.kernel + 1, l.stride) + l.lookahead, floor_div(o.hi, l.stride) + l.lookahead};
}

Interval back_residual(Interval o, const LayerSpec& l)
{
    for (int d : l.dilations) {
        o.lo -= int64_t(l.kernel - 1 - l.lookahead) * (d + 1);
        o.hi += int64_t(l.lookahead) * (d + 1);
    }
    return o;
}

Interval back_layer(Interval o, const LayerSpec& l)
{
    switch (l.kind) {
    case LayerKind::Conv:
        return back_conv(o, l);
    case LayerKind::TransposedConv:
        return back_tconv(o, l);
    case LayerKind::ResidualStack:
        return back_residual(o, l);
    case LayerKind::Activation:
        return o;
    }
    return o;
}

const char* kind_name(LayerKind k)
{
    switch (k) {
    case LayerKind::Conv:
        return "conv";
    case LayerKind::TransposedConv:
        return "transposed-conv";
    case LayerKind::ResidualStack:
        return "residual-stack";
    case LayerKind::Activation:
        return "activation";
    }
    return "?";
}

LayerKind kind_from(const std::string& s, const std::string& at)
{
    if (s == "conv")
        return LayerKind::Conv;
    if (s == "transposed-conv")
        return LayerKind::TransposedConv;
    if (s == "residual-stack")
        return LayerKind::ResidualStack;
    if (s == "activation")
        return LayerKind::Activation;
    throw ValidationError(at + ": unknown layer kind '" + s + "'");
}

} // namespace

std::string to_string(LayerKind k) { return kind_name(k); }

int encoder_output_channels(const ArchitectureSpec& spec)
{
    return spec.encoder.empty() ? spec.filterbank.bands : spec.encoder.back().channels_out;
}

void validate(const ArchitectureSpec& spec)
{
    if (!(spec.sample_rate > 0))
        throw ValidationError("sample_rate must be positive");
    const auto& fb = spec.filterbank;
    if (fb.bands < 1 || (fb.bands & (fb.bands - 1)) != 0)
        throw ValidationError("filterbank.bands must be a power of two");
    if (!(fb.attenuation_db >= 30.0 && fb.attenuation_db <= 120.0))
        throw ValidationError("filterbank.attenuation_db must lie in [30, 120]");
    if (spec.latent_dim < 1)
        throw ValidationError("latent_dim must be > 0");

    int ch = fb.bands;
    int64_t down = 1;
    for (size_t i = 0; i < spec.encoder.size(); ++i) {
        const auto& l = spec.encoder[i];
        const auto at = where("encoder", i);
        check_layer(l, at);
        if (l.kind == LayerKind::ResidualStack || l.kind == LayerKind::TransposedConv)
            throw UnsupportedLayoutError(at + ": encoder supports conv and activation layers only");
        if (l.channels_in != ch)
            throw ValidationError(at + ": channels_in " + std::to_string(l.channels_in) + " does not match " +
                                  std::to_string(ch));
        ch = l.channels_out;
        down *= l.stride;
    }
    if (ch != spec.latent_dim && ch != 2 * spec.latent_dim)
        throw ValidationError("encoder output channels must be latent_dim or 2 * latent_dim");
    if (ch == 2 * spec.latent_dim) {
        bool has_conv = false;
        for (const auto& l : spec.encoder)
            has_conv = has_conv || l.kind == LayerKind::Conv;
        if (!has_conv)
            throw ValidationError("encoder mean/variance head needs a conv layer");
    }

    ch = spec.latent_dim;
    int64_t up = 1;
    for (size_t i = 0; i < spec.decoder.size(); ++i) {
        const auto& l = spec.decoder[i];
        const auto at = where("decoder", i);
        check_layer(l, at);
        if (l.kind == LayerKind::Conv && l.stride != 1)
            throw UnsupportedLayoutError(at + ": decoder convs must have stride 1");
        if (l.channels_in != ch)
            throw ValidationError(at + ": channels_in " + std::to_string(l.channels_in) + " does not match " +
                                  std::to_string(ch));
        ch = l.channels_out;
        if (l.kind == LayerKind::TransposedConv)
            up *= l.stride;
    }
    if (ch != fb.bands)
        throw ValidationError("decoder output channels must equal filterbank.bands");
    if (down != up)
        throw ValidationError("rate symmetry: encoder stride product " + std::to_string(down) +
                              " != decoder upsampling product " + std::to_string(up));
}

bool is_causal(const ArchitectureSpec& spec)
{
    for (const auto* part : {&spec.encoder, &spec.decoder})
        for (const auto& l : *part)
            if (l.lookahead != 0)
                return false;
    return true;
}

int64_t compression_ratio(const ArchitectureSpec& spec)
{
    validate(spec);
    int64_t c = spec.filterbank.bands;
    for (const auto& l : spec.encoder)
        c *= l.stride;
    return c;
}

int64_t encoder_receptive_field(const ArchitectureSpec& spec)
{
    validate(spec);
    const auto bank = design_shared(spec.filterbank);
    int64_t rf = 1 + (bank->design_taps - 1);
    int64_t rate = spec.filterbank.bands;
    for (const auto& l : spec.encoder) {
        if (l.kind == LayerKind::Conv)
            rf += int64_t(l.kernel - 1) * l.dilation() * rate;
        rate *= l.stride;
    }
    return rf;
}

int64_t decoder_receptive_field(const ArchitectureSpec& spec)
{
    const int64_t cr = compression_ratio(spec);
    const auto bank = design_shared(spec.filterbank);
    const int64_t M = spec.filterbank.bands;
    const int64_t n0 = bank->design_taps, pad = bank->support_offset();
    int64_t best = 0;
    // Output phases repeat with period C_r; evaluate one full period far from
    // the signal start so integer rounding is the only effect.
    const int64_t t0 = cr * 4096;
    for (int64_t t = t0; t < t0 + cr; ++t) {
        Interval iv{t, t};
        if (M > 1)
            iv = {ceil_div(iv.lo - pad - n0 + 1, M), floor_div(iv.hi - pad, M)};
        for (auto it = spec.decoder.rbegin(); it != spec.decoder.rend(); ++it)
            iv = back_layer(iv, *it);
        best = std::max(best, iv.hi - iv.lo + 1);
    }
    return best;
}

int64_t total_receptive_field(int64_t r_fe, int64_t r_fd, int64_t c_r) { return r_fe + (r_fd - 1) * c_r; }

int64_t cumulative_delay(const ArchitectureSpec& spec)
{
    validate(spec);
    // delay in frames of the current rate
    int64_t delta = 0;
    for (const auto& l : spec.encoder) {
        if (l.kind == LayerKind::Conv)
            delta = ceil_div(delta + l.lookahead, l.stride);
    }
    for (const auto& l : spec.decoder) {
        switch (l.kind) {
        case LayerKind::Conv:
            delta += l.lookahead;
            break;
        case LayerKind::TransposedConv:
            delta = (delta + l.lookahead) * l.stride;
            break;
        case LayerKind::ResidualStack:
            for (int d : l.dilations)
                delta += int64_t(l.lookahead) * (d + 1);
            break;
        case LayerKind::Activation:
            break;
        }
    }
    return delta * spec.filterbank.bands;
}

int64_t representation_delay(const FilterbankSpec& fb)
{
    const auto bank = design_shared(fb);
    return bank->length() - 1;
}

double samples_to_ms(int64_t samples, double sample_rate) { return double(samples) / sample_rate * 1000.0; }

double jitter_bound(int64_t c_r, double sample_rate) { return samples_to_ms(c_r, sample_rate); }

LatencyBudget latency_budget(const ArchitectureSpec& spec, int64_t block)
{
    const int64_t cr = compression_ratio(spec);
    if (block < cr || block % cr != 0)
        throw InfeasibleBlockError("block of " + std::to_string(block) +
                                   " samples is infeasible: the minimum block is the compression ratio " +
                                   std::to_string(cr) + " and blocks must be multiples of it");
    const double sr = spec.sample_rate;
    LatencyBudget b;
    b.block_samples = block;
    b.buffering_samples = 2 * block;
    b.representation_samples = representation_delay(spec.filterbank);
    b.cumulative_samples = cumulative_delay(spec);
    b.jitter_bound_samples = cr;
    b.block_ms = samples_to_ms(b.block_samples, sr);
    b.buffering_ms = samples_to_ms(b.buffering_samples, sr);
    b.representation_ms = samples_to_ms(b.representation_samples, sr);
    b.cumulative_ms = samples_to_ms(b.cumulative_samples, sr);
    b.jitter_bound_ms = jitter_bound(cr, sr);
    return b;
}

int64_t parameter_count(const ArchitectureSpec& spec)
{
    int64_t n = 0;
    for (const auto* part : {&spec.encoder, &spec.decoder}) {
        for (const auto& l : *part) {
            const int64_t ci = l.channels_in, co = l.channels_out, k = l.kernel;
            switch (l.kind) {
            case LayerKind::Conv:
            case LayerKind::TransposedConv:
                n += ci * co * k + co;
                break;
            case LayerKind::ResidualStack:
                n += int64_t(l.dilations.size()) * 2 * (ci * ci * k + ci);
                break;
            case LayerKind::Activation:
                break;
            }
        }
    }
    return n;
}

AnalysisReport analyze(const ArchitectureSpec& spec, int64_t block)
{
    AnalysisReport r;
    r.name = spec.name;
    r.sample_rate = spec.sample_rate;
    r.compression_ratio = compression_ratio(spec);
    r.encoder_rf_samples = encoder_receptive_field(spec);
    r.decoder_rf_latents = decoder_receptive_field(spec);
    r.total_rf_samples = total_receptive_field(r.encoder_rf_samples, r.decoder_rf_latents, r.compression_ratio);
    r.total_rf_ms = samples_to_ms(r.total_rf_samples, spec.sample_rate);
    r.min_block_samples = r.compression_ratio;
    r.parameter_count = parameter_count(spec);
    r.causal = is_causal(spec);
    r.budget = latency_budget(spec, block > 0 ? block : r.compression_ratio);
    return r;
}

nlohmann::json to_json(const LatencyBudget& b)
{
    return {{"block_samples", b.block_samples},
            {"buffering_samples", b.buffering_samples},
            {"representation_samples", b.representation_samples},
            {"cumulative_samples", b.cumulative_samples},
            {"jitter_bound_samples", b.jitter_bound_samples},
            {"block_ms", b.block_ms},
            {"buffering_ms", b.buffering_ms},
            {"representation_ms", b.representation_ms},
            {"cumulative_ms", b.cumulative_ms},
            {"jitter_bound_ms", b.jitter_bound_ms}};
}

nlohmann::json to_json(const AnalysisReport& r)
{
    return {{"name", r.name},
            {"sample_rate", r.sample_rate},
            {"compression_ratio", r.compression_ratio},
            {"rf_encoder_samples", r.encoder_rf_samples},
            {"rf_decoder_latents", r.decoder_rf_latents},
            {"rf_total_samples", r.total_rf_samples},
            {"rf_total_ms", r.total_rf_ms},
            {"min_block_samples", r.min_block_samples},
            {"parameter_count", r.parameter_count},
            {"causal", r.causal},
            {"budget", to_json(r.budget)}};
}

namespace {

LayerSpec layer_from_json(const nlohmann::json& j, const std::string& at, int prev_channels)
{
    if (!j.is_object())
        throw ValidationError(at + ": layer must be an object");
    static const std::vector<std::string> known = {"kind", "kernel", "stride", "dilations", "channels", "lookahead",
                                                   "function"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ValidationError(at + ": unknown key '" + it.key() + "'");
    if (!j.contains("kind"))
        throw ValidationError(at + ": missing 'kind'");
    LayerSpec l;
    try {
        l.kind = kind_from(j.at("kind").get<std::string>(), at);
        l.kernel = j.value("kernel", 1);
        l.stride = j.value("stride", 1);
        l.lookahead = j.value("lookahead", 0);
        if (j.contains("dilations"))
            l.dilations = j.at("dilations").get<std::vector<int>>();
        if (j.contains("channels")) {
            auto c = j.at("channels").get<std::vector<int>>();
            if (c.size() == 1)
                c.push_back(c[0]);
            if (c.size() != 2)
                throw ValidationError(at + ": channels must be [in, out]");
            l.channels_in = c[0];
            l.channels_out = c[1];
        } else if (l.kind == LayerKind::Activation) {
            l.channels_in = l.channels_out = prev_channels;
        } else {
            throw ValidationError(at + ": missing 'channels'");
        }
        if (j.contains("function")) {
            auto f = j.at("function").get<std::string>();
            if (f == "tanh")
                l.function = ActivationFn::Tanh;
            else if (f == "leaky_relu")
                l.function = ActivationFn::LeakyRelu;
            else
                throw ValidationError(at + ": unknown activation '" + f + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(at + ": " + e.what());
    }
    return l;
}

nlohmann::json layer_to_json(const LayerSpec& l)
{
    nlohmann::json j;
    j["kind"] = kind_name(l.kind);
    if (l.kind == LayerKind::Activation) {
        j["function"] = l.function == ActivationFn::Tanh ? "tanh" : "leaky_relu";
        j["channels"] = {l.channels_in, l.channels_out};
        return j;
    }
    j["kernel"] = l.kernel;
    j["stride"] = l.stride;
    if (!l.dilations.empty())
        j["dilations"] = l.dilations;
    j["channels"] = {l.channels_in, l.channels_out};
    j["lookahead"] = l.lookahead;
    return j;
}

} // namespace

ArchitectureSpec spec_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ValidationError("spec must be an object");
    ArchitectureSpec s;
    try {
        s.name = j.value("name", std::string("unnamed"));
        s.sample_rate = j.value("sample_rate", 44100.0);
        if (!j.contains("filterbank"))
            throw ValidationError("missing 'filterbank'");
        const auto& fb = j.at("filterbank");
        s.filterbank.bands = fb.at("bands").get<int>();
        s.filterbank.attenuation_db = fb.value("attenuation_db", 100.0);
        if (!j.contains("latent_dim"))
            throw ValidationError("missing 'latent_dim'");
        s.latent_dim = j.at("latent_dim").get<int>();
        s.fixture = j.value("fixture", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("spec: ") + e.what());
    }
    int ch = s.filterbank.bands;
    if (j.contains("encoder")) {
        const auto& enc = j.at("encoder");
        for (size_t i = 0; i < enc.size(); ++i) {
            s.encoder.push_back(layer_from_json(enc[i], where("encoder", i), ch));
            ch = s.encoder.back().channels_out;
        }
    }
    ch = s.latent_dim;
    if (j.contains("decoder")) {
        const auto& dec = j.at("decoder");
        for (size_t i = 0; i < dec.size(); ++i) {
            s.decoder.push_back(layer_from_json(dec[i], where("decoder", i), ch));
            ch = s.decoder.back().channels_out;
        }
    }
    validate(s);
    return s;
}

nlohmann::json spec_to_json(const ArchitectureSpec& s)
{
    nlohmann::json j;
    j["name"] = s.name;
    j["sample_rate"] = s.sample_rate;
    j["filterbank"] = {{"bands", s.filterbank.bands}, {"attenuation_db", s.filterbank.attenuation_db}};
    j["encoder"] = nlohmann::json::array();
    for (const auto& l : s.encoder)
        j["encoder"].push_back(layer_to_json(l));
    j["latent_dim"] = s.latent_dim;
    j["decoder"] = nlohmann::json::array();
    for (const auto& l : s.decoder)
        j["decoder"].push_back(layer_to_json(l));
    if (!s.fixture.empty())
        j["fixture"] = s.fixture;
    return j;
}

ArchitectureSpec parse_spec(const std::string& text, const std::string& origin)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        size_t line = 1, col = 1;
        for (size_t i = 0; i < text.size() && i + 1 < e.byte; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw FormatError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
    }
    try {
        return spec_from_json(j);
    } catch (const ValidationError& e) {
        throw ValidationError(origin + ": " + e.what());
    }
}

ArchitectureSpec load_spec(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ValidationError("cannot open spec file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_spec(ss.str(), path);
}

void save_spec(const ArchitectureSpec& spec, const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw ValidationError("cannot write '" + path + "'");
    f << spec_to_json(spec).dump(2) << "\n";
}

ArchitectureSpec make_identity_spec()
{
    ArchitectureSpec s;
    s.name = "identity";
    s.filterbank = {1, 100.0};
    s.latent_dim = 1;
    s.fixture = "identity";
    return s;
}

ArchitectureSpec make_delay_spec(int delay_samples)
{
    if (delay_samples < 0)
        throw ValidationError("delay must be non-negative");
    ArchitectureSpec s;
    s.name = "delay_" + std::to_string(delay_samples);
    s.filterbank = {1, 100.0};
    s.latent_dim = 1;
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.kernel = delay_samples + 1;
    l.channels_in = l.channels_out = 1;
    s.encoder.push_back(l);
    s.fixture = "delay";
    return s;
}

} // namespace lowlat
