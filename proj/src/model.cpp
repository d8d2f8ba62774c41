#include <algorithm>
#include <cmath>

#include "lowlat/error.hpp"
#include "lowlat/stages.hpp"
#include "lowlat/streamkernel.hpp"

namespace lowlat {

namespace {

int64_t ceil_div_pos(int64_t a, int64_t b) { return (a + b - 1) / b; }

// index of the conv whose rows are cut down to the posterior mean, or -1
int mean_head_index(const ArchitectureSpec& spec)
{
    if (encoder_output_channels(spec) != 2 * spec.latent_dim)
        return -1;
    for (int i = static_cast<int>(spec.encoder.size()) - 1; i >= 0; --i)
        if (spec.encoder[i].kind == LayerKind::Conv)
            return i;
    return -1;
}

} // namespace

ModelInstance::ModelInstance(ArchitectureSpec spec, WeightSet weights)
    : spec_(std::move(spec)), weights_(std::move(weights))
{
    validate(spec_);
    check_weights(spec_, weights_);
    build(false);
}

ModelInstance::ModelInstance(const ModelInstance& o)
    : spec_(o.spec_), weights_(o.weights_), bank_(o.bank_), cr_(o.cr_), streamable_(o.streamable_),
      reconfigured_(o.reconfigured_), noop_warning_(o.noop_warning_), stream_delay_(o.stream_delay_)
{
    for (const auto& s : o.stages_)
        stages_.push_back(s->clone());
}

ModelInstance& ModelInstance::operator=(const ModelInstance& o)
{
    if (this != &o) {
        ModelInstance tmp(o);
        *this = std::move(tmp);
    }
    return *this;
}

ModelInstance::ModelInstance(ModelInstance&&) noexcept = default;
ModelInstance& ModelInstance::operator=(ModelInstance&&) noexcept = default;
ModelInstance::~ModelInstance() = default;

void ModelInstance::build(bool delay_lines)
{
    stages_.clear();
    bank_ = design_shared(spec_.filterbank);
    cr_ = lowlat::compression_ratio(spec_);
    streamable_ = delay_lines || is_causal(spec_);
    const int head = mean_head_index(spec_);

    // delay of the current signal relative to the offline reference, in
    // frames of the current rate
    int64_t delta = 0;
    auto conv_geometry = [&](int la, int stride, int& extra, long& mask) {
        if (!delay_lines) {
            extra = 0;
            mask = 0;
            return;
        }
        const int64_t out = ceil_div_pos(delta + la, stride);
        extra = static_cast<int>(out * stride - delta - la);
        mask = static_cast<long>(out);
        delta = out;
    };

    if (!bank_->passthrough())
        stages_.push_back(pqmf_detail::analysis_stage(*bank_));

    int ch = spec_.filterbank.bands;
    for (int i = 0; i < static_cast<int>(spec_.encoder.size()); ++i) {
        const auto& l = spec_.encoder[i];
        if (l.kind == LayerKind::Activation) {
            stages_.push_back(std::make_unique<stage::Activation>(l.function, ch));
            continue;
        }
        const std::string p = "encoder." + std::to_string(i);
        const auto& w = weights_.get(p + ".weight");
        const auto& b = weights_.get(p + ".bias");
        const int rows = i == head ? spec_.latent_dim : l.channels_out;
        int extra;
        long mask;
        conv_geometry(l.lookahead, l.stride, extra, mask);
        stages_.push_back(std::make_unique<stage::Conv>(l.channels_in, rows, l.kernel, l.stride, l.dilation(), extra,
                                                        w.values.data(), b.values.data(), mask));
        ch = rows;
    }

    for (int i = 0; i < static_cast<int>(spec_.decoder.size()); ++i) {
        const auto& l = spec_.decoder[i];
        const std::string p = "decoder." + std::to_string(i);
        switch (l.kind) {
        case LayerKind::Activation:
            stages_.push_back(std::make_unique<stage::Activation>(l.function, ch));
            break;
        case LayerKind::Conv: {
            const auto& w = weights_.get(p + ".weight");
            const auto& b = weights_.get(p + ".bias");
            int extra;
            long mask;
            conv_geometry(l.lookahead, 1, extra, mask);
            stages_.push_back(std::make_unique<stage::Conv>(l.channels_in, l.channels_out, l.kernel, 1, l.dilation(),
                                                            extra, w.values.data(), b.values.data(), mask));
            ch = l.channels_out;
            break;
        }
        case LayerKind::TransposedConv: {
            const auto& w = weights_.get(p + ".weight");
            const auto& b = weights_.get(p + ".bias");
            long mask = 0;
            if (delay_lines) {
                delta = (delta + l.lookahead) * l.stride;
                mask = static_cast<long>(delta);
            }
            stages_.push_back(std::make_unique<stage::TransposedConv>(l.channels_in, l.channels_out, l.kernel, l.stride,
                                                                      0, w.values.data(), b.values.data(), mask));
            ch = l.channels_out;
            break;
        }
        case LayerKind::ResidualStack: {
            std::vector<stage::Residual::Sublayer> subs;
            const int la = delay_lines ? l.lookahead : 0;
            for (size_t s = 0; s < l.dilations.size(); ++s) {
                const int d = l.dilations[s];
                const std::string q = p + "." + std::to_string(s);
                const auto& w1 = weights_.get(q + ".dilated.weight");
                const auto& b1 = weights_.get(q + ".dilated.bias");
                const auto& w2 = weights_.get(q + ".pointwise.weight");
                const auto& b2 = weights_.get(q + ".pointwise.bias");
                const long m1 = delay_lines ? static_cast<long>(delta + int64_t(la) * d) : 0;
                const long m2 = delay_lines ? static_cast<long>(delta + int64_t(la) * (d + 1)) : 0;
                subs.push_back({stage::Conv(ch, ch, l.kernel, 1, d, 0, w1.values.data(), b1.values.data(), m1),
                                stage::Conv(ch, ch, l.kernel, 1, 1, 0, w2.values.data(), b2.values.data(), m2),
                                stage::DelayLine(ch, la * (d + 1))});
                if (delay_lines)
                    delta += int64_t(la) * (d + 1);
            }
            stages_.push_back(std::make_unique<stage::Residual>(ch, std::move(subs)));
            break;
        }
        }
    }

    if (!bank_->passthrough())
        stages_.push_back(pqmf_detail::synthesis_stage(*bank_));
    stream_delay_ = delay_lines ? delta * spec_.filterbank.bands : 0;
}

TensorBlock ModelInstance::process_block(const TensorBlock& block)
{
    if (!streamable_)
        throw ValidationError("spec '" + spec_.name + "' has lookahead; call reconfigure_noncausal before streaming");
    if (block.channels != 1)
        throw ShapeError("process_block expects a mono block");
    if (block.frames <= 0 || block.frames % cr_ != 0)
        throw InfeasibleBlockError("block of " + std::to_string(block.frames) +
                                   " frames is not a positive multiple of the compression ratio " + std::to_string(cr_));
    for (float v : block.data)
        if (!std::isfinite(v))
            throw ValidationError("process_block: input contains non-finite samples");
    if (stages_.empty())
        return block;
    const TensorBlock* cur = &block;
    TensorBlock* bufs[2] = {&a_, &b_};
    int which = 0;
    for (auto& s : stages_) {
        TensorBlock* out = bufs[which];
        s->process(*cur, *out);
        cur = out;
        which ^= 1;
    }
    return *cur;
}

std::vector<float> ModelInstance::process(const std::vector<float>& block)
{
    return process_block(TensorBlock::mono(block)).data;
}

void ModelInstance::reset()
{
    for (auto& s : stages_)
        s->reset();
}

ModelInstance instantiate(const ArchitectureSpec& spec, const WeightSource& source)
{
    validate(spec);
    switch (source.kind) {
    case WeightSource::Kind::Seeded:
        return ModelInstance(spec, seeded_weights(spec, source.seed, source.zero_bias));
    case WeightSource::Kind::File:
        return ModelInstance(spec, load_weights(source.path));
    case WeightSource::Kind::Fixture:
        return ModelInstance(spec, fixture_weights(spec));
    }
    throw ValidationError("unknown weight source");
}

ModelInstance reconfigure_noncausal(const ModelInstance& inst)
{
    ModelInstance out(inst.spec_, inst.weights_);
    if (is_causal(inst.spec_)) {
        out.noop_warning_ = true;
        return out;
    }
    out.build(true);
    out.reconfigured_ = true;
    return out;
}

} // namespace lowlat
