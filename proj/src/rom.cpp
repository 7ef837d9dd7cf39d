#include "mixrom/rom.hpp"
#include "mixrom/errors.hpp"
#include "mixrom/rng.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace mixrom {

// ---------------------------------------------------------------------------
// FieldScaler
// ---------------------------------------------------------------------------

FieldScaler FieldScaler::fit(ScalerMode mode, const Eigen::MatrixXd& data) {
    FieldScaler s;
    s.mode = mode;
    switch (mode) {
    case ScalerMode::MinMax:
        s.a = data.minCoeff();
        s.b = data.maxCoeff();
        if (s.b <= s.a) s.b = s.a + 1.0;
        break;
    case ScalerMode::Standard: {
        s.a = data.mean();
        const double var = (data.array() - s.a).square().mean();
        s.b = (var > 0.0) ? std::sqrt(var) : 1.0;
        break;
    }
    case ScalerMode::None:
        s.a = 0.0;
        s.b = 1.0;
        break;
    }
    return s;
}

Eigen::MatrixXd FieldScaler::transform(const Eigen::MatrixXd& data) const {
    switch (mode) {
    case ScalerMode::MinMax: return (data.array() - a) / (b - a);
    case ScalerMode::Standard: return (data.array() - a) / b;
    case ScalerMode::None: return data;
    }
    return data;
}

Eigen::MatrixXd FieldScaler::inverse_transform(const Eigen::MatrixXd& data) const {
    switch (mode) {
    case ScalerMode::MinMax: return data.array() * (b - a) + a;
    case ScalerMode::Standard: return data.array() * b + a;
    case ScalerMode::None: return data;
    }
    return data;
}

// ---------------------------------------------------------------------------
// Autoencoder
// ---------------------------------------------------------------------------

Eigen::MatrixXd Autoencoder::encode(const Eigen::MatrixXd& fields) const {
    return forward(encoder_spec, encoder, scaler.transform(fields));
}

Eigen::MatrixXd Autoencoder::decode(const Eigen::MatrixXd& latents) const {
    return scaler.inverse_transform(forward(decoder_spec, decoder, latents));
}

RomSettings RomSettings::preset(const std::string& name) {
    RomSettings s;
    if (name == "hills-paper") {
        s.encoder_hidden = {50, 20};
        s.latent_dim = 3;
        s.train.learning_rate = 5e-4;
        s.train.weight_decay = 1e-4;
        s.train.epochs = 10000;
    } else if (name == "bump-paper") {
        s.encoder_hidden = {50, 20};
        s.latent_dim = 10;
        s.train.learning_rate = 1e-3;
        s.train.weight_decay = 1e-8;
        s.train.epochs = 10000;
    } else if (name == "hills-desk") {
        s.encoder_hidden = {40, 16};
        s.latent_dim = 3;
        s.train.learning_rate = 2e-3;
        s.train.weight_decay = 1e-6;
        s.train.epochs = 3000;
    } else if (name == "bump-desk") {
        s.encoder_hidden = {40, 16};
        s.latent_dim = 10;
        s.train.learning_rate = 2e-3;
        s.train.weight_decay = 1e-6;
        s.train.epochs = 3000;
    } else {
        throw ConfigError("unknown ROM preset '" + name + "'");
    }
    return s;
}

AutoencoderResult train_autoencoder(const SnapshotMatrix& snapshots,
                                    const RomSettings& settings) {
    if (snapshots.n_snapshots() < 2) {
        throw EmptyInput("train_autoencoder: need at least 2 snapshots");
    }
    const auto n_dof = static_cast<int>(snapshots.n_dof());

    AutoencoderResult res;
    res.ae.scaler = FieldScaler::fit(settings.scaler, snapshots.columns);
    const Eigen::MatrixXd scaled = res.ae.scaler.transform(snapshots.columns);

    NetSpec enc;
    enc.widths.push_back(n_dof);
    for (int w : settings.encoder_hidden) enc.widths.push_back(w);
    enc.widths.push_back(settings.latent_dim);
    enc.hidden_activation = settings.activation;
    enc.output_head = OutputHead::Linear;

    NetSpec dec;
    dec.widths.push_back(settings.latent_dim);
    for (auto it = settings.encoder_hidden.rbegin(); it != settings.encoder_hidden.rend(); ++it) {
        dec.widths.push_back(*it);
    }
    dec.widths.push_back(n_dof);
    dec.hidden_activation = settings.activation;
    dec.output_head = OutputHead::Linear;

    res.ae.encoder_spec = enc;
    res.ae.decoder_spec = dec;
    res.ae.encoder = init_he(enc, seed_for(settings.train.seed, "encoder"));
    res.ae.decoder = init_he(dec, seed_for(settings.train.seed, "decoder"));

    // Joint reconstruction training: one Adam state per net, gradients chained
    // through the latent block.
    AdamState adam_enc(res.ae.encoder);
    AdamState adam_dec(res.ae.decoder);
    const double denom = static_cast<double>(scaled.size());
    res.report.loss_history.reserve(static_cast<std::size_t>(settings.train.epochs));
    for (int epoch = 0; epoch < settings.train.epochs; ++epoch) {
        const ForwardCache enc_cache = forward_cached(enc, res.ae.encoder, scaled);
        const ForwardCache dec_cache =
            forward_cached(dec, res.ae.decoder, enc_cache.acts.back());
        const Eigen::MatrixXd diff = dec_cache.acts.back() - scaled;
        const double loss = diff.squaredNorm() / denom;
        if (!std::isfinite(loss)) {
            throw DivergenceDetected("autoencoder training diverged at epoch " +
                                     std::to_string(epoch));
        }
        res.report.loss_history.push_back(loss);

        const Eigen::MatrixXd dout = (2.0 / denom) * diff;
        BackpropResult dec_bp = backprop(dec, res.ae.decoder, dec_cache, dout);
        BackpropResult enc_bp = backprop(enc, res.ae.encoder, enc_cache, dec_bp.input_grad);
        if (settings.train.weight_decay > 0.0) {
            for (std::size_t l = 0; l < dec_bp.grads.w.size(); ++l) {
                dec_bp.grads.w[l] += settings.train.weight_decay * res.ae.decoder.w[l];
            }
            for (std::size_t l = 0; l < enc_bp.grads.w.size(); ++l) {
                enc_bp.grads.w[l] += settings.train.weight_decay * res.ae.encoder.w[l];
            }
        }
        adam_dec.step(res.ae.decoder, dec_bp.grads, settings.train);
        adam_enc.step(res.ae.encoder, enc_bp.grads, settings.train);
        if (!res.ae.encoder.all_finite() || !res.ae.decoder.all_finite()) {
            throw DivergenceDetected("autoencoder training diverged at epoch " +
                                     std::to_string(epoch));
        }
    }

    // Reconstruction quality in unscaled units.
    const Eigen::MatrixXd recon = res.ae.decode(res.ae.encode(snapshots.columns));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < snapshots.n_snapshots(); ++j) {
        const double ref_norm = snapshots.columns.col(j).norm();
        const double err = (recon.col(j) - snapshots.columns.col(j)).norm() /
                           (ref_norm > 0.0 ? ref_norm : 1.0);
        res.report.per_snapshot_relative_l2.push_back(err);
        res.report.max_relative_l2 = std::max(res.report.max_relative_l2, err);
        sum += err;
    }
    res.report.mean_relative_l2 = sum / static_cast<double>(snapshots.n_snapshots());
    return res;
}

Rom build_rom(const std::vector<FieldSnapshot>& snapshots, const RomSettings& settings) {
    if (snapshots.empty()) throw EmptyInput("build_rom: no snapshots");
    const SnapshotMatrix matrix = assemble_matrix(snapshots);
    for (std::size_t i = 1; i < snapshots.size(); ++i) {
        if (snapshots[i].mesh != snapshots.front().mesh &&
            mesh_hash(*snapshots[i].mesh) != mesh_hash(*snapshots.front().mesh)) {
            throw ShapeMismatch("build_rom: snapshots live on different meshes");
        }
    }

    Rom rom;
    AutoencoderResult ae = train_autoencoder(matrix, settings);
    rom.ae = std::move(ae.ae);
    rom.report = std::move(ae.report);
    rom.training_params = matrix.params;
    rom.mesh_ref = snapshots.front().mesh;
    rom.quantity = snapshots.front().quantity;
    rom.source_tag = snapshots.front().model_tag;

    const Eigen::MatrixXd latents = rom.ae.encode(matrix.columns); // r x N
    rom.rbf = rbf_fit(matrix.params, latents.transpose(), settings.kernel,
                      settings.shape_epsilon);
    return rom;
}

FieldSnapshot rom_predict(const Rom& rom, const ParameterVector& mu) {
    if (mu.size() != static_cast<Eigen::Index>(rom.training_params.front().size())) {
        throw ShapeMismatch("rom_predict: parameter dimension mismatch");
    }
    const Eigen::VectorXd latent = rbf_predict(rom.rbf, mu.values);
    FieldSnapshot out;
    out.mesh = rom.mesh_ref;
    out.values = rom.ae.decode(latent);
    out.quantity = rom.quantity;
    out.params = mu;
    out.model_tag = "rom:" + rom.source_tag;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization (embedded in surrogate bundles)
// ---------------------------------------------------------------------------

namespace {

void write_str(std::ostream& out, const std::string& s) {
    const auto n = static_cast<std::uint32_t>(s.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& in) {
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n > (1u << 20)) throw FormatError("rom block: bad string length");
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw FormatError("rom block: truncated string");
    return s;
}

} // namespace

void write_rom(std::ostream& out, const Rom& rom) {
    const char magic[4] = {'M', 'R', 'M', '1'};
    out.write(magic, 4);
    write_str(out, rom.source_tag);
    write_str(out, rom.quantity);
    const char mode = static_cast<char>(rom.ae.scaler.mode);
    out.write(&mode, 1);
    out.write(reinterpret_cast<const char*>(&rom.ae.scaler.a), sizeof(double));
    out.write(reinterpret_cast<const char*>(&rom.ae.scaler.b), sizeof(double));
    write_net(out, rom.ae.encoder_spec, rom.ae.encoder);
    write_net(out, rom.ae.decoder_spec, rom.ae.decoder);
    write_rbf(out, rom.rbf);
    const auto np = static_cast<std::uint32_t>(rom.training_params.size());
    out.write(reinterpret_cast<const char*>(&np), sizeof(np));
    const auto dim = static_cast<std::uint32_t>(rom.training_params.front().size());
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(dim); ++d) {
        write_str(out, rom.training_params.front().names[static_cast<std::size_t>(d)]);
    }
    for (const auto& p : rom.training_params) {
        out.write(reinterpret_cast<const char*>(p.values.data()),
                  static_cast<std::streamsize>(sizeof(double) * p.values.size()));
    }
    const std::uint64_t mhash = mesh_hash(*rom.mesh_ref);
    out.write(reinterpret_cast<const char*>(&mhash), sizeof(mhash));
    if (!out) throw IoError("write_rom: stream failure");
}

Rom read_rom(std::istream& in, const MeshPtr& mesh) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MRM1", 4) != 0) {
        throw FormatError("rom block: bad magic");
    }
    Rom rom;
    rom.source_tag = read_str(in);
    rom.quantity = read_str(in);
    char mode = 0;
    in.read(&mode, 1);
    rom.ae.scaler.mode = static_cast<ScalerMode>(mode);
    in.read(reinterpret_cast<char*>(&rom.ae.scaler.a), sizeof(double));
    in.read(reinterpret_cast<char*>(&rom.ae.scaler.b), sizeof(double));
    read_net(in, rom.ae.encoder_spec, rom.ae.encoder);
    read_net(in, rom.ae.decoder_spec, rom.ae.decoder);
    rom.rbf = read_rbf(in);
    std::uint32_t np = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&np), sizeof(np));
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in || np == 0 || dim == 0) throw FormatError("rom block: bad parameter header");
    std::vector<std::string> names;
    for (std::uint32_t d = 0; d < dim; ++d) names.push_back(read_str(in));
    for (std::uint32_t i = 0; i < np; ++i) {
        ParameterVector p;
        p.names = names;
        p.values.resize(static_cast<Eigen::Index>(dim));
        in.read(reinterpret_cast<char*>(p.values.data()),
                static_cast<std::streamsize>(sizeof(double) * dim));
        if (!in) throw FormatError("rom block: truncated parameters");
        rom.training_params.push_back(std::move(p));
    }
    std::uint64_t mhash = 0;
    in.read(reinterpret_cast<char*>(&mhash), sizeof(mhash));
    if (!in) throw FormatError("rom block: truncated mesh hash");
    if (mesh && mesh_hash(*mesh) != mhash) {
        throw FormatError("rom block: mesh hash mismatch");
    }
    rom.mesh_ref = mesh;
    return rom;
}

} // namespace mixrom
