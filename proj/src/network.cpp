#include "popsan/network.hpp"

#include <cmath>

namespace popsan {

NetworkSpec NetworkSpec::defaults() {
    NetworkSpec s;
    s.obs_dim = 6;
    s.act_dim = 2;
    s.pop_in = 10;
    s.pop_out = 10;
    s.obs_low = {-2, -2, -1, -1, -3, -3};
    s.obs_high = {2, 2, 1, 1, 3, 3};
    s.stages = {{3, {64}, 0.2}, {2, {64}, 0.2}, {1, {64}, 0.6}};
    return s;
}

void NetworkSpec::validate() const {
    require(obs_dim >= 1 && act_dim >= 1, "need obs_dim >= 1 and act_dim >= 1");
    require(pop_in >= 1 && pop_out >= 1, "population sizes must be >= 1");
    require(static_cast<int>(obs_low.size()) == obs_dim &&
                static_cast<int>(obs_high.size()) == obs_dim,
            "obs_low/obs_high must have length obs_dim");
    require(!stages.empty(), "need at least one stage");
    double lambda_sum = 0.0;
    int prev_t = 0;
    for (size_t i = 0; i < stages.size(); ++i) {
        const StageConfig& st = stages[i];
        require(st.timesteps >= 1, "stage timesteps must be >= 1");
        if (i > 0) require(st.timesteps < prev_t, "stage timesteps must be strictly decreasing");
        prev_t = st.timesteps;
        require(st.loss_weight >= 0.0 && st.loss_weight <= 1.0,
                "stage loss weight must be in [0, 1]");
        require(!st.hidden.empty(), "each stage needs at least one LIF layer");
        for (int h : st.hidden) require(h >= 1, "hidden width must be >= 1");
        lambda_sum += st.loss_weight;
    }
    require(std::fabs(lambda_sum - 1.0) <= 1e-9, "stage loss weights must sum to 1");
    require(d_c >= 0.0 && d_c < 1.0 && d_v >= 0.0 && d_v < 1.0, "decays must be in [0, 1)");
    require(v_th > 0.0, "threshold must be positive");
    require(surrogate_width > 0.0, "surrogate width must be positive");
}

size_t NetworkSpec::param_count() const {
    size_t n = 2 * static_cast<size_t>(obs_dim) * pop_in;  // mu + sigma
    size_t width = static_cast<size_t>(obs_dim) * pop_in;
    const size_t out_n = static_cast<size_t>(act_dim) * pop_out;
    for (size_t i = 0; i < stages.size(); ++i) {
        for (int h : stages[i].hidden) {
            n += width * h + h;
            width = h;
        }
        n += width * out_n + out_n;                         // head LIF
        n += static_cast<size_t>(act_dim) * pop_out + act_dim;  // head decoder
        if (i + 1 < stages.size())
            n += static_cast<size_t>(stages[i].timesteps) * stages[i + 1].timesteps;
    }
    n += act_dim;  // log_std
    return n;
}

Vec decode_rates(const Decoder& dec, const Vec& fr) {
    const int act_dim = dec.w.rows;
    const int pop = dec.w.cols;
    require(static_cast<int>(fr.size()) == act_dim * pop, "firing-rate length mismatch");
    Vec a(static_cast<size_t>(act_dim));
    for (int i = 0; i < act_dim; ++i) {
        const double* wr = dec.w.row(i);
        double acc = dec.b[i];
        for (int j = 0; j < pop; ++j) acc += wr[j] * fr[i * pop + j];
        a[i] = acc;
    }
    return a;
}

DecoderGrads decoder_backward(const Decoder& dec, const Vec& dl_daction, const Vec& fr) {
    const int act_dim = dec.w.rows;
    const int pop = dec.w.cols;
    require(static_cast<int>(dl_daction.size()) == act_dim, "action-gradient length mismatch");
    require(static_cast<int>(fr.size()) == act_dim * pop, "firing-rate length mismatch");
    DecoderGrads g;
    g.d_w = Mat(act_dim, pop);
    g.d_b.assign(static_cast<size_t>(act_dim), 0.0);
    g.d_fr.assign(fr.size(), 0.0);
    for (int i = 0; i < act_dim; ++i) {
        const double gi = dl_daction[i];
        g.d_b[i] = gi;
        const double* wr = dec.w.row(i);
        double* dwr = g.d_w.row(i);
        for (int j = 0; j < pop; ++j) {
            dwr[j] = gi * fr[i * pop + j];
            g.d_fr[i * pop + j] = gi * wr[j];
        }
    }
    return g;
}

LIFParams PopSanActor::make_layer(int n_in, int n_out, RngStream& rng) const {
    LIFParams p;
    p.w = Mat(n_out, n_in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (double& v : p.w.a) v = rng.uniform(-bound, bound);
    p.b.assign(static_cast<size_t>(n_out), 0.0);
    p.d_c = spec.d_c;
    p.d_v = spec.d_v;
    p.v_th = spec.v_th;
    p.v_rest = 0.0;
    p.surrogate_width = spec.surrogate_width;
    return p;
}

PopSanActor::PopSanActor(const NetworkSpec& s) : spec(s) {
    spec.validate();
    RngStream rng(spec.seed, stream_id::kActorInit);
    coder = PopulationCoder(spec.obs_dim, spec.pop_in, spec.obs_low, spec.obs_high);

    const int num_stages = spec.num_stages();
    int width = coder.num_neurons();
    stage_layers.resize(num_stages);
    for (int i = 0; i < num_stages; ++i) {
        for (int h : spec.stages[i].hidden) {
            stage_layers[i].push_back(make_layer(width, h, rng));
            width = h;
        }
    }
    for (int i = 0; i + 1 < num_stages; ++i)
        shrinks.emplace_back(spec.stages[i].timesteps, spec.stages[i + 1].timesteps);

    heads.resize(num_stages);
    for (int i = 0; i < num_stages; ++i) {
        const int stage_width = spec.stages[i].hidden.back();
        heads[i].lif = make_layer(stage_width, output_neurons(), rng);
        heads[i].decoder.w = Mat(spec.act_dim, spec.pop_out);
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.pop_out));
        for (double& v : heads[i].decoder.w.a) v = rng.uniform(-bound, bound);
        heads[i].decoder.b.assign(static_cast<size_t>(spec.act_dim), 0.0);
    }
    log_std.assign(static_cast<size_t>(spec.act_dim), std::log(0.5));
}

namespace {

HeadTrace run_head(const Head& head, const Mat& stage_out) {
    HeadTrace ht;
    auto [train, trace] = lif_forward(stage_out, head.lif);
    ht.lif_trace = std::move(trace);
    const int timesteps = train.data.rows;
    const int n = train.data.cols;
    ht.firing_rates.assign(static_cast<size_t>(n), 0.0);
    for (int t = 0; t < timesteps; ++t) {
        const double* row = train.data.row(t);
        for (int j = 0; j < n; ++j) ht.firing_rates[j] += row[j];
    }
    for (int j = 0; j < n; ++j) ht.firing_rates[j] /= timesteps;
    ht.action = decode_rates(head.decoder, ht.firing_rates);
    return ht;
}

}  // namespace

ActorForward PopSanActor::forward(const Vec& obs, Mode mode, RngStream& rng,
                                  ActorTrace* trace) const {
    ActorTrace local;
    ActorTrace& tr = trace ? *trace : local;
    tr = ActorTrace{};
    tr.mode = mode;
    tr.observation = obs;

    tr.activation = coder.compute_receptive_field(obs);
    SpikeTrain encoded = coder.encode_spikes(tr.activation, spec.stages[0].timesteps, rng);
    tr.input_spikes = encoded.data;

    const int num_stages = spec.num_stages();
    tr.stages.resize(num_stages);
    tr.heads.resize(num_stages);

    ActorForward out;
    Mat x = tr.input_spikes;
    for (int i = 0; i < num_stages; ++i) {
        for (const LIFParams& layer : stage_layers[i]) {
            auto [spikes, ltrace] = lif_forward(x, layer);
            x = std::move(spikes.data);
            tr.stages[i].layers.push_back(std::move(ltrace));
        }
        const bool final_stage = (i == num_stages - 1);
        if (final_stage) {
            tr.heads[i] = run_head(heads[i], x);
            out.action = tr.heads[i].action;
        } else {
            if (mode == Mode::Train) {
                tr.heads[i] = run_head(heads[i], x);
                out.aux_actions.push_back(tr.heads[i].action);
            }
            auto [shrunk, cache] = shrinks[i].forward(x);
            tr.stages[i].shrink = std::move(cache);
            x = std::move(shrunk);
        }
    }
    return out;
}

ActorGrads PopSanActor::zero_grads() const {
    ActorGrads g;
    g.d_mu = Mat(coder.mu.rows, coder.mu.cols);
    g.d_sigma = Mat(coder.sigma.rows, coder.sigma.cols);
    g.d_stage_w.resize(stage_layers.size());
    g.d_stage_b.resize(stage_layers.size());
    for (size_t i = 0; i < stage_layers.size(); ++i)
        for (const LIFParams& layer : stage_layers[i]) {
            g.d_stage_w[i].emplace_back(layer.w.rows, layer.w.cols);
            g.d_stage_b[i].emplace_back(layer.b.size(), 0.0);
        }
    for (const ShrinkLayer& s : shrinks) g.d_shrink_w.emplace_back(s.w.rows, s.w.cols);
    for (const Head& h : heads) {
        HeadGrads hg;
        hg.d_lif_w = Mat(h.lif.w.rows, h.lif.w.cols);
        hg.d_lif_b.assign(h.lif.b.size(), 0.0);
        hg.d_dec_w = Mat(h.decoder.w.rows, h.decoder.w.cols);
        hg.d_dec_b.assign(h.decoder.b.size(), 0.0);
        g.d_heads.push_back(std::move(hg));
    }
    g.d_log_std.assign(log_std.size(), 0.0);
    return g;
}

namespace {

void acc_mat(Mat& dst, const Mat& src) {
    for (size_t k = 0; k < dst.a.size(); ++k) dst.a[k] += src.a[k];
}
void acc_vec(Vec& dst, const Vec& src) {
    for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}
// Backward through one head; returns the gradient w.r.t. the stage output.
Mat head_backward(const Head& head, const HeadTrace& ht, const Vec& dl_daction,
                  double weight, HeadGrads& accum) {
    Vec dl_da(dl_daction.size());
    for (size_t k = 0; k < dl_da.size(); ++k) dl_da[k] = weight * dl_daction[k];

    DecoderGrads dg = decoder_backward(head.decoder, dl_da, ht.firing_rates);
    acc_mat(accum.d_dec_w, dg.d_w);
    acc_vec(accum.d_dec_b, dg.d_b);

    const int timesteps = ht.lif_trace.timesteps();
    const int n = static_cast<int>(dg.d_fr.size());
    Mat dl_dspikes(timesteps, n);
    for (int t = 0; t < timesteps; ++t)
        for (int j = 0; j < n; ++j) dl_dspikes(t, j) = dg.d_fr[j] / timesteps;

    LIFGrads lg = lif_backward(dl_dspikes, ht.lif_trace, head.lif);
    acc_mat(accum.d_lif_w, lg.d_w);
    acc_vec(accum.d_lif_b, lg.d_b);
    return lg.d_x;
}

}  // namespace

void PopSanActor::backward(const ActorTrace& trace, const Vec& dl_daction,
                           const std::vector<Vec>& dl_daux, const Vec& dl_dlog_std,
                           ActorGrads& accum, bool apply_stage_weights) const {
    const int num_stages = spec.num_stages();
    require(trace.mode == Mode::Train, "backward needs a train-mode trace");
    require(static_cast<int>(trace.stages.size()) == num_stages, "trace/network mismatch");
    if (apply_stage_weights)
        require(static_cast<int>(dl_daux.size()) == num_stages - 1,
                "need one auxiliary gradient per non-final stage");
    else
        require(dl_daux.empty(), "single-head backward takes no auxiliary gradients");

    if (!dl_dlog_std.empty()) {
        require(dl_dlog_std.size() == log_std.size(), "log-std gradient length mismatch");
        acc_vec(accum.d_log_std, dl_dlog_std);
    }

    // dl_dstage_out accumulates contributions that join at a stage's output:
    // the head path and the shrink path of the following stage.
    Mat dl_dstage_out;
    for (int i = num_stages - 1; i >= 0; --i) {
        const bool final_stage = (i == num_stages - 1);
        const double weight =
            apply_stage_weights ? spec.stages[i].loss_weight : (final_stage ? 1.0 : 0.0);

        Mat joined;
        if (final_stage) {
            joined = head_backward(heads[i], trace.heads[i], dl_daction, weight, accum.d_heads[i]);
        } else {
            ShrinkGrads sg = shrinks[i].backward(dl_dstage_out, trace.stages[i].shrink,
                                                 spec.shrink_grad_through_mean);
            acc_mat(accum.d_shrink_w[i], sg.d_w);
            joined = std::move(sg.d_input);
            if (weight != 0.0) {
                Mat head_path = head_backward(heads[i], trace.heads[i], dl_daux[i], weight,
                                              accum.d_heads[i]);
                acc_mat(joined, head_path);
            }
        }

        for (int l = static_cast<int>(stage_layers[i].size()) - 1; l >= 0; --l) {
            LIFGrads lg = lif_backward(joined, trace.stages[i].layers[l], stage_layers[i][l]);
            acc_mat(accum.d_stage_w[i][l], lg.d_w);
            acc_vec(accum.d_stage_b[i][l], lg.d_b);
            joined = std::move(lg.d_x);
        }
        dl_dstage_out = std::move(joined);
    }

    // dl_dstage_out now holds the gradient w.r.t. the encoded input spikes.
    EncoderGrads eg = coder.backward(dl_dstage_out, trace.activation, trace.observation);
    acc_mat(accum.d_mu, eg.d_mu);
    acc_mat(accum.d_sigma, eg.d_sigma);
}

std::vector<TensorRef> PopSanActor::param_refs() {
    std::vector<TensorRef> refs;
    refs.push_back({"encoder.mu", coder.mu.a.data(), coder.mu.a.size()});
    refs.push_back({"encoder.sigma", coder.sigma.a.data(), coder.sigma.a.size()});
    for (size_t i = 0; i < stage_layers.size(); ++i)
        for (size_t l = 0; l < stage_layers[i].size(); ++l) {
            std::string base =
                "stage" + std::to_string(i + 1) + ".layer" + std::to_string(l + 1);
            refs.push_back({base + ".w", stage_layers[i][l].w.a.data(),
                            stage_layers[i][l].w.a.size()});
            refs.push_back({base + ".b", stage_layers[i][l].b.data(),
                            stage_layers[i][l].b.size()});
        }
    for (size_t i = 0; i < shrinks.size(); ++i)
        refs.push_back({"shrink" + std::to_string(i + 1) + ".w", shrinks[i].w.a.data(),
                        shrinks[i].w.a.size()});
    for (size_t i = 0; i < heads.size(); ++i) {
        std::string base = "head" + std::to_string(i + 1);
        refs.push_back({base + ".lif.w", heads[i].lif.w.a.data(), heads[i].lif.w.a.size()});
        refs.push_back({base + ".lif.b", heads[i].lif.b.data(), heads[i].lif.b.size()});
        refs.push_back(
            {base + ".decoder.w", heads[i].decoder.w.a.data(), heads[i].decoder.w.a.size()});
        refs.push_back(
            {base + ".decoder.b", heads[i].decoder.b.data(), heads[i].decoder.b.size()});
    }
    refs.push_back({"log_std", log_std.data(), log_std.size()});
    return refs;
}

std::vector<TensorRef> PopSanActor::grad_refs(ActorGrads& g, const PopSanActor&) {
    std::vector<TensorRef> refs;
    refs.push_back({"encoder.mu", g.d_mu.a.data(), g.d_mu.a.size()});
    refs.push_back({"encoder.sigma", g.d_sigma.a.data(), g.d_sigma.a.size()});
    for (size_t i = 0; i < g.d_stage_w.size(); ++i)
        for (size_t l = 0; l < g.d_stage_w[i].size(); ++l) {
            std::string base =
                "stage" + std::to_string(i + 1) + ".layer" + std::to_string(l + 1);
            refs.push_back({base + ".w", g.d_stage_w[i][l].a.data(), g.d_stage_w[i][l].a.size()});
            refs.push_back({base + ".b", g.d_stage_b[i][l].data(), g.d_stage_b[i][l].size()});
        }
    for (size_t i = 0; i < g.d_shrink_w.size(); ++i)
        refs.push_back({"shrink" + std::to_string(i + 1) + ".w", g.d_shrink_w[i].a.data(),
                        g.d_shrink_w[i].a.size()});
    for (size_t i = 0; i < g.d_heads.size(); ++i) {
        std::string base = "head" + std::to_string(i + 1);
        refs.push_back({base + ".lif.w", g.d_heads[i].d_lif_w.a.data(),
                        g.d_heads[i].d_lif_w.a.size()});
        refs.push_back(
            {base + ".lif.b", g.d_heads[i].d_lif_b.data(), g.d_heads[i].d_lif_b.size()});
        refs.push_back({base + ".decoder.w", g.d_heads[i].d_dec_w.a.data(),
                        g.d_heads[i].d_dec_w.a.size()});
        refs.push_back(
            {base + ".decoder.b", g.d_heads[i].d_dec_b.data(), g.d_heads[i].d_dec_b.size()});
    }
    refs.push_back({"log_std", g.d_log_std.data(), g.d_log_std.size()});
    return refs;
}

size_t PopSanActor::num_params() const {
    size_t n = 0;
    for (const TensorRef& r : const_cast<PopSanActor*>(this)->param_refs()) n += r.n;
    return n;
}

std::vector<std::string> PopSanActor::lif_layer_names(Mode mode) const {
    std::vector<std::string> names;
    for (size_t i = 0; i < stage_layers.size(); ++i)
        for (size_t l = 0; l < stage_layers[i].size(); ++l)
            names.push_back("stage" + std::to_string(i + 1) + ".layer" + std::to_string(l + 1));
    if (mode == Mode::Train) {
        for (size_t i = 0; i < heads.size(); ++i)
            names.push_back("head" + std::to_string(i + 1));
    } else {
        names.push_back("head" + std::to_string(heads.size()));
    }
    return names;
}

std::vector<double> trace_spike_rates(const ActorTrace& trace) {
    std::vector<double> rates;
    auto layer_rate = [](const LIFTrace& t) {
        double total = 0.0;
        for (double v : t.spikes.a) total += v;
        return t.spikes.a.empty() ? 0.0 : total / static_cast<double>(t.spikes.a.size());
    };
    for (const StageTrace& st : trace.stages)
        for (const LIFTrace& lt : st.layers) rates.push_back(layer_rate(lt));
    for (size_t i = 0; i < trace.heads.size(); ++i) {
        const bool final_head = (i + 1 == trace.heads.size());
        if (trace.mode == Mode::Eval && !final_head) continue;
        rates.push_back(layer_rate(trace.heads[i].lif_trace));
    }
    return rates;
}

}  // namespace popsan
