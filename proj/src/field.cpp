#include "mixrom/field.hpp"
#include "mixrom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace mixrom {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
        throw FormatError("invalid number '" + tok + "' in " + where);
    }
    return v;
}

void require_finite(double v, const std::string& where) {
    if (!std::isfinite(v)) {
        throw FormatError("non-finite value in " + where);
    }
}

} // namespace

void ParameterVector::validate() const {
    if (values.size() == 0) {
        throw ShapeMismatch("parameter vector must have at least one entry");
    }
    if (static_cast<Eigen::Index>(names.size()) != values.size()) {
        throw ShapeMismatch("parameter names/values length mismatch: " +
                            std::to_string(names.size()) + " vs " +
                            std::to_string(values.size()));
    }
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw FormatError("non-finite parameter value '" + names[i] + "'");
        }
        if (names[i].empty() ||
            names[i].find_first_of(" \t=:") != std::string::npos) {
            throw FormatError("invalid parameter name '" + names[i] + "'");
        }
    }
}

bool ParameterVector::same_values(const ParameterVector& other) const {
    if (values.size() != other.values.size()) return false;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] != other.values[i]) return false;
    }
    return true;
}

void Mesh::validate() const {
    if (x.size() == 0 || x.size() != y.size()) {
        throw ShapeMismatch("mesh coordinate arrays empty or of unequal length");
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw FormatError("non-finite mesh coordinate at dof " + std::to_string(i));
        }
    }
}

void FieldSnapshot::validate() const {
    if (!mesh) throw ShapeMismatch("snapshot has no mesh");
    mesh->validate();
    if (values.size() != mesh->n_dof()) {
        throw ShapeMismatch("snapshot values length " + std::to_string(values.size()) +
                            " does not match mesh n_dof " + std::to_string(mesh->n_dof()));
    }
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw FormatError("non-finite field value at dof " + std::to_string(i));
        }
    }
    params.validate();
}

SnapshotMatrix assemble_matrix(const std::vector<FieldSnapshot>& snapshots) {
    if (snapshots.empty()) {
        throw EmptyInput("assemble_matrix: no snapshots");
    }
    const Eigen::Index n = snapshots.front().n_dof();
    const std::string& quantity = snapshots.front().quantity;
    SnapshotMatrix m;
    m.columns.resize(n, static_cast<Eigen::Index>(snapshots.size()));
    m.params.reserve(snapshots.size());
    for (std::size_t j = 0; j < snapshots.size(); ++j) {
        const auto& s = snapshots[j];
        if (s.n_dof() != n) {
            throw MixedDofCount("snapshot " + std::to_string(j) + " has " +
                                std::to_string(s.n_dof()) + " dofs, expected " +
                                std::to_string(n));
        }
        if (s.quantity != quantity) {
            throw ShapeMismatch("snapshot " + std::to_string(j) + " holds quantity '" +
                                s.quantity + "', expected '" + quantity + "'");
        }
        m.columns.col(static_cast<Eigen::Index>(j)) = s.values;
        m.params.push_back(s.params);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Snapshot persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kTextMagic[] = "mixrom-snapshot v1";
constexpr char kBinMagic[4] = {'M', 'R', 'O', 'M'};

void save_text(const FieldSnapshot& s, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << kTextMagic << "\n";
    out << "quantity: " << s.quantity << "\n";
    out << "model_tag: " << s.model_tag << "\n";
    out << "n_params: " << s.params.size() << "\n";
    for (Eigen::Index i = 0; i < s.params.size(); ++i) {
        out << "param: " << s.params.names[i] << " " << fmt_double(s.params.values[i]) << "\n";
    }
    out << "n_dof: " << s.n_dof() << "\n";
    for (Eigen::Index i = 0; i < s.n_dof(); ++i) {
        out << fmt_double(s.mesh->x[i]) << " " << fmt_double(s.mesh->y[i]) << " "
            << fmt_double(s.values[i]) << "\n";
    }
    if (!out) throw IoError("write failed on '" + path + "'");
}

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw FormatError("truncated binary snapshot '" + path + "'");
    return v;
}
std::uint64_t read_u64(std::istream& in, const std::string& path) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw FormatError("truncated binary snapshot '" + path + "'");
    return v;
}
std::string read_str(std::istream& in, const std::string& path) {
    const std::uint32_t n = read_u32(in, path);
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n))
        throw FormatError("truncated binary snapshot '" + path + "'");
    return s;
}

void save_binary(const FieldSnapshot& s, const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kBinMagic, 4);
    const char version = 1;
    out.write(&version, 1);
    write_str(out, s.quantity);
    write_str(out, s.model_tag);
    write_u32(out, static_cast<std::uint32_t>(s.params.size()));
    for (Eigen::Index i = 0; i < s.params.size(); ++i) {
        write_str(out, s.params.names[i]);
        const double v = s.params.values[i];
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    write_u64(out, static_cast<std::uint64_t>(s.n_dof()));
    for (Eigen::Index i = 0; i < s.n_dof(); ++i) {
        const double trip[3] = {s.mesh->x[i], s.mesh->y[i], s.values[i]};
        out.write(reinterpret_cast<const char*>(trip), sizeof(trip));
    }
    if (!out) throw IoError("write failed on '" + path + "'");
}

FieldSnapshot load_text(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || line != kTextMagic) {
        throw FormatError("'" + path + "': missing or unknown snapshot header line");
    }

    auto read_header = [&](const std::string& key) -> std::string {
        if (!std::getline(in, line)) {
            throw FormatError("'" + path + "': missing header field '" + key + "'");
        }
        const std::string prefix = key + ": ";
        if (line.rfind(prefix, 0) != 0) {
            throw FormatError("'" + path + "': expected header field '" + key +
                              "', got '" + line + "'");
        }
        return line.substr(prefix.size());
    };

    FieldSnapshot s;
    s.quantity = read_header("quantity");
    s.model_tag = read_header("model_tag");
    const auto n_params = static_cast<Eigen::Index>(
        parse_double(read_header("n_params"), path + " n_params"));
    s.params.names.resize(static_cast<std::size_t>(n_params));
    s.params.values.resize(n_params);
    for (Eigen::Index i = 0; i < n_params; ++i) {
        if (!std::getline(in, line) || line.rfind("param: ", 0) != 0) {
            throw FormatError("'" + path + "': missing header field 'param' #" +
                              std::to_string(i));
        }
        std::istringstream ls(line.substr(7));
        std::string name, value;
        if (!(ls >> name >> value)) {
            throw FormatError("'" + path + "': malformed param line '" + line + "'");
        }
        s.params.names[static_cast<std::size_t>(i)] = name;
        s.params.values[i] = parse_double(value, path + " param " + name);
        require_finite(s.params.values[i], path + " param " + name);
    }
    const auto n_dof = static_cast<Eigen::Index>(
        parse_double(read_header("n_dof"), path + " n_dof"));
    if (n_dof <= 0) throw FormatError("'" + path + "': n_dof must be positive");

    Mesh mesh;
    mesh.x.resize(n_dof);
    mesh.y.resize(n_dof);
    s.values.resize(n_dof);
    for (Eigen::Index i = 0; i < n_dof; ++i) {
        if (!std::getline(in, line)) {
            throw FormatError("'" + path + "': expected " + std::to_string(n_dof) +
                              " data rows, got " + std::to_string(i));
        }
        std::istringstream ls(line);
        std::string tx, ty, tv;
        if (!(ls >> tx >> ty >> tv)) {
            throw FormatError("'" + path + "': malformed data row " + std::to_string(i));
        }
        const std::string where = path + " row " + std::to_string(i);
        mesh.x[i] = parse_double(tx, where);
        mesh.y[i] = parse_double(ty, where);
        s.values[i] = parse_double(tv, where);
        require_finite(mesh.x[i], where);
        require_finite(mesh.y[i], where);
        require_finite(s.values[i], where);
    }
    s.mesh = std::make_shared<Mesh>(std::move(mesh));
    return s;
}

FieldSnapshot load_binary(std::istream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    char version = 0;
    in.read(&version, 1);
    if (version != 1) {
        throw FormatError("'" + path + "': unsupported binary snapshot version " +
                          std::to_string(static_cast<int>(version)));
    }
    FieldSnapshot s;
    s.quantity = read_str(in, path);
    s.model_tag = read_str(in, path);
    const std::uint32_t n_params = read_u32(in, path);
    s.params.names.resize(n_params);
    s.params.values.resize(static_cast<Eigen::Index>(n_params));
    for (std::uint32_t i = 0; i < n_params; ++i) {
        s.params.names[i] = read_str(in, path);
        double v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
            throw FormatError("truncated binary snapshot '" + path + "'");
        require_finite(v, path + " param " + s.params.names[i]);
        s.params.values[static_cast<Eigen::Index>(i)] = v;
    }
    const auto n_dof = static_cast<Eigen::Index>(read_u64(in, path));
    if (n_dof <= 0) throw FormatError("'" + path + "': n_dof must be positive");
    Mesh mesh;
    mesh.x.resize(n_dof);
    mesh.y.resize(n_dof);
    s.values.resize(n_dof);
    for (Eigen::Index i = 0; i < n_dof; ++i) {
        double trip[3];
        if (!in.read(reinterpret_cast<char*>(trip), sizeof(trip)))
            throw FormatError("truncated binary snapshot '" + path + "'");
        const std::string where = path + " dof " + std::to_string(i);
        require_finite(trip[0], where);
        require_finite(trip[1], where);
        require_finite(trip[2], where);
        mesh.x[i] = trip[0];
        mesh.y[i] = trip[1];
        s.values[i] = trip[2];
    }
    s.mesh = std::make_shared<Mesh>(std::move(mesh));
    return s;
}

} // namespace

void save_snapshot(const FieldSnapshot& s, const std::string& path, SnapshotFormat format) {
    s.validate();
    if (format == SnapshotFormat::Text) {
        save_text(s, path);
    } else {
        save_binary(s, path);
    }
}

FieldSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    if (!in) throw FormatError("'" + path + "': file too short");
    in.seekg(0);
    FieldSnapshot s = (std::memcmp(magic, kBinMagic, 4) == 0) ? load_binary(in, path)
                                                              : load_text(in, path);
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

namespace {

/// Indices of the k nearest source points to (px, py), including every point
/// tied with the k-th distance.
std::vector<Eigen::Index> nearest_with_ties(const Mesh& mesh, double px, double py, int k) {
    const Eigen::Index n = mesh.n_dof();
    std::vector<std::pair<double, Eigen::Index>> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = mesh.x[i] - px;
        const double dy = mesh.y[i] - py;
        d2[static_cast<std::size_t>(i)] = {dx * dx + dy * dy, i};
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), d2.size());
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(kk) - 1, d2.end());
    const double cut = d2[kk - 1].first * (1.0 + 1e-12) + 1e-300;
    std::vector<Eigen::Index> idx;
    idx.reserve(kk + 4);
    for (const auto& [dist, i] : d2) {
        if (dist <= cut) idx.push_back(i);
    }
    return idx;
}

double idw_value(const FieldSnapshot& src, double px, double py, int k) {
    const auto idx = nearest_with_ties(*src.mesh, px, py, k);
    double wsum = 0.0, vsum = 0.0;
    for (Eigen::Index i : idx) {
        const double dx = src.mesh->x[i] - px;
        const double dy = src.mesh->y[i] - py;
        const double d2 = dx * dx + dy * dy;
        if (d2 < 1e-24) {
            return src.values[i]; // exact hit
        }
        const double w = 1.0 / d2;
        wsum += w;
        vsum += w * src.values[i];
    }
    return vsum / wsum;
}

void check_in_domain(const Mesh& source, const Eigen::VectorXd& xs,
                     const Eigen::VectorXd& ys, double margin_rel) {
    const double x_lo = source.x.minCoeff(), x_hi = source.x.maxCoeff();
    const double y_lo = source.y.minCoeff(), y_hi = source.y.maxCoeff();
    const double diag = std::hypot(x_hi - x_lo, y_hi - y_lo);
    const double m = margin_rel * (diag > 0 ? diag : 1.0);
    std::string offenders;
    int n_off = 0;
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
        if (xs[i] < x_lo - m || xs[i] > x_hi + m || ys[i] < y_lo - m || ys[i] > y_hi + m) {
            ++n_off;
            if (n_off <= 5) {
                offenders += " (" + fmt_double(xs[i]) + ", " + fmt_double(ys[i]) + ")";
            }
        }
    }
    if (n_off > 0) {
        throw OutOfDomain(std::to_string(n_off) +
                          " target point(s) outside source mesh bounds:" + offenders +
                          (n_off > 5 ? " ..." : ""));
    }
}

} // namespace

Eigen::VectorXd sample_field(const FieldSnapshot& source, const Eigen::VectorXd& xs,
                             const Eigen::VectorXd& ys, const InterpOptions& opts) {
    if (xs.size() != ys.size()) {
        throw ShapeMismatch("sample_field: coordinate arrays of unequal length");
    }
    check_in_domain(*source.mesh, xs, ys, opts.extrapolation_margin);
    Eigen::VectorXd out(xs.size());
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
        out[i] = idw_value(source, xs[i], ys[i], opts.k_neighbors);
    }
    return out;
}

FieldSnapshot interpolate_to_mesh(const FieldSnapshot& source, const MeshPtr& target,
                                  const InterpOptions& opts) {
    source.validate();
    target->validate();
    FieldSnapshot out;
    out.mesh = target;
    out.values = sample_field(source, target->x, target->y, opts);
    out.quantity = source.quantity;
    out.params = source.params;
    out.model_tag = source.model_tag;
    return out;
}

std::uint64_t mesh_hash(const Mesh& mesh) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const double* data, Eigen::Index n) {
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(data);
        for (Eigen::Index i = 0; i < n * static_cast<Eigen::Index>(sizeof(double)); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    mix(mesh.x.data(), mesh.x.size());
    mix(mesh.y.data(), mesh.y.size());
    return h;
}

} // namespace mixrom
