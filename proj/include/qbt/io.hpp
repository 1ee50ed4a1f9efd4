#pragma once

// Matrix Market reader/writer and the key/value system manifest.
//
// Manifest schema (one "key = value" per line, '#' starts a comment):
//   format = qbt-manifest-1
//   n, m, p       dimensions
//   nu            optional index hint
//   E, A, B       matrix files (relative to the manifest directory)
//   C             optional linear output part
//   M1 .. Mp      quadratic forms
//   tag.<name>    free-form metadata
// Any other key is kept verbatim in SystemManifest::extra.

#include "qbt/model.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qbt {

namespace fs = std::filesystem;

struct SystemManifest {
    fs::path path;  // the manifest file itself
    Index n = 0, m = 0, p = 0;
    std::optional<int> nu;
    std::map<std::string, std::string> files;  // role -> file name
    std::map<std::string, std::string> tags;
    std::map<std::string, std::string> extra;

    fs::path resolve(const std::string& role) const { return path.parent_path() / files.at(role); }
};

namespace mm {

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes coordinate real general, 1-based, 17 significant digits.
inline void write(const fs::path& file, const Mat& X, const std::string& comment = {}) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + file.string() + " for writing");
    Index nnz = 0;
    for (Index j = 0; j < X.cols(); ++j)
        for (Index i = 0; i < X.rows(); ++i)
            if (X(i, j) != 0.0) ++nnz;
    out << "%%MatrixMarket matrix coordinate real general\n";
    if (!comment.empty()) out << "% " << comment << "\n";
    out << X.rows() << " " << X.cols() << " " << nnz << "\n";
    for (Index j = 0; j < X.cols(); ++j)
        for (Index i = 0; i < X.rows(); ++i)
            if (X(i, j) != 0.0) out << i + 1 << " " << j + 1 << " " << fmt17(X(i, j)) << "\n";
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + file.string());
}

/// Reads coordinate or array files with real/integer fields and general,
/// symmetric or skew-symmetric storage.
inline Mat read(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + file.string());
    const std::string where = file.string();
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, where + ": empty file");
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix")
        throw Error(ErrorCode::ParseError, where + ": missing %%MatrixMarket matrix header");
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    if (format != "coordinate" && format != "array")
        throw Error(ErrorCode::ParseError, where + ": unsupported format '" + format + "'");
    if (field != "real" && field != "integer" && field != "double")
        throw Error(ErrorCode::ParseError, where + ": unsupported field '" + field + "'");
    if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
        throw Error(ErrorCode::ParseError, where + ": unsupported symmetry '" + symmetry + "'");

    auto next_data_line = [&](std::string& l) {
        while (std::getline(in, l)) {
            auto pos = l.find_first_not_of(" \t\r");
            if (pos == std::string::npos || l[pos] == '%') continue;
            return true;
        }
        return false;
    };
    if (!next_data_line(line)) throw Error(ErrorCode::ParseError, where + ": missing size line");
    std::istringstream ss(line);
    long long rows = -1, cols = -1, nnz = -1;
    ss >> rows >> cols;
    if (format == "coordinate") ss >> nnz;
    if (!ss || rows < 0 || cols < 0 || (format == "coordinate" && nnz < 0))
        throw Error(ErrorCode::ParseError, where + ": bad size line '" + line + "'");
    if (symmetry != "general" && rows != cols)
        throw Error(ErrorCode::ParseError, where + ": symmetric storage needs a square matrix");

    Mat X = Mat::Zero(rows, cols);
    const double mirror = symmetry == "skew-symmetric" ? -1.0 : 1.0;
    auto put = [&](long long i, long long j, double v) {
        X(i, j) += v;
        if (symmetry != "general" && i != j) X(j, i) += mirror * v;
    };
    if (format == "coordinate") {
        for (long long k = 0; k < nnz; ++k) {
            if (!next_data_line(line))
                throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(nnz) + " entries");
            std::istringstream es(line);
            long long i = 0, j = 0;
            double v = 0;
            es >> i >> j >> v;
            if (!es || i < 1 || j < 1 || i > rows || j > cols)
                throw Error(ErrorCode::ParseError, where + ": bad entry '" + line + "'");
            put(i - 1, j - 1, v);
        }
    } else {
        for (long long j = 0; j < cols; ++j) {
            const long long i0 = symmetry == "general" ? 0 : (symmetry == "symmetric" ? j : j + 1);
            for (long long i = i0; i < rows; ++i) {
                if (!next_data_line(line)) throw Error(ErrorCode::ParseError, where + ": too few values");
                std::istringstream es(line);
                double v = 0;
                es >> v;
                if (!es) throw Error(ErrorCode::ParseError, where + ": bad value '" + line + "'");
                put(i, j, v);
            }
        }
    }
    return X;
}

}  // namespace mm

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline long long parse_int(const std::string& v, const std::string& key, const std::string& where) {
    try {
        std::size_t used = 0;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, where + ": key '" + key + "' expects an integer, got '" + v + "'");
    }
}

/// Exactly symmetric input passes through untouched; small defects are averaged away.
inline Mat symmetrize_checked(const Mat& M, const std::string& name) {
    const double defect = (M - M.transpose()).norm();
    if (defect == 0.0) return M;
    if (defect >= 1e-8 * M.norm())
        throw Error(ErrorCode::AsymmetricQuadraticForm,
                    name + " is not symmetric (defect " + mm::fmt17(defect) + ")");
    return sym(M);
}

}  // namespace detail

inline SystemManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
    SystemManifest mf;
    mf.path = path;
    const std::string where = path.string();
    std::string line;
    bool have_n = false, have_m = false, have_p = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, where + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::ParseError, where + ":" + std::to_string(lineno) + ": empty key");
        if (key == "format") {
            if (val != "qbt-manifest-1") throw Error(ErrorCode::ParseError, where + ": unknown format '" + val + "'");
        } else if (key == "n") {
            mf.n = detail::parse_int(val, key, where);
            have_n = true;
        } else if (key == "m") {
            mf.m = detail::parse_int(val, key, where);
            have_m = true;
        } else if (key == "p") {
            mf.p = detail::parse_int(val, key, where);
            have_p = true;
        } else if (key == "nu") {
            mf.nu = static_cast<int>(detail::parse_int(val, key, where));
        } else if (key == "E" || key == "A" || key == "B" || key == "C" ||
                   (key.size() > 1 && key[0] == 'M' && std::isdigit(static_cast<unsigned char>(key[1])))) {
            mf.files[key] = val;
        } else if (key.rfind("tag.", 0) == 0) {
            mf.tags[key.substr(4)] = val;
        } else {
            mf.extra[key] = val;
        }
    }
    if (!have_n || !have_m || !have_p) throw Error(ErrorCode::ParseError, where + ": n, m and p are required");
    for (const char* role : {"E", "A", "B"})
        if (!mf.files.count(role)) throw Error(ErrorCode::ParseError, where + ": missing role " + role);
    return mf;
}

inline DescriptorSystem load_system(const SystemManifest& mf) {
    for (const auto& [role, name] : mf.files)
        if (!fs::exists(mf.resolve(role)))
            throw Error(ErrorCode::IoError, "manifest references missing file " + mf.resolve(role).string());
    DescriptorSystem s;
    s.E = mm::read(mf.resolve("E"));
    s.A = mm::read(mf.resolve("A"));
    s.B = mm::read(mf.resolve("B"));
    if (mf.files.count("C")) s.output.C = mm::read(mf.resolve("C"));
    for (Index j = 1; j <= mf.p; ++j) {
        const std::string role = "M" + std::to_string(j);
        if (!mf.files.count(role)) {
            if (s.output.C && j == 1) break;  // purely linear output
            throw Error(ErrorCode::ParseError, mf.path.string() + ": missing role " + role);
        }
        s.output.M.push_back(detail::symmetrize_checked(mm::read(mf.resolve(role)), role));
    }
    s.tags = mf.tags;
    const auto fail = [&](const std::string& what) {
        throw Error(ErrorCode::DimensionMismatch, mf.path.string() + ": declared " + what + " does not match files");
    };
    if (s.A.rows() != mf.n) fail("n");
    if (s.B.cols() != mf.m) fail("m");
    if (s.p() != mf.p) fail("p");
    check_dimensions(s);
    return s;
}

inline DescriptorSystem load_system(const fs::path& manifest_path) {
    return load_system(read_manifest(manifest_path));
}

/// Writes the matrices and a manifest.txt into dir. extra entries are appended verbatim.
inline SystemManifest save_system(const DescriptorSystem& s, const fs::path& dir,
                                  const std::map<std::string, std::string>& extra = {},
                                  std::optional<int> nu = std::nullopt) {
    check_dimensions(s);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error(ErrorCode::IoError, "cannot create directory " + dir.string());
    SystemManifest mf;
    mf.path = dir / "manifest.txt";
    mf.n = s.n();
    mf.m = s.m();
    mf.p = s.p();
    mf.nu = nu;
    mf.tags = s.tags;
    mf.extra = extra;
    auto put = [&](const std::string& role, const Mat& X) {
        const std::string name = role + ".mtx";
        mm::write(dir / name, X);
        mf.files[role] = name;
    };
    put("E", s.E);
    put("A", s.A);
    put("B", s.B);
    if (s.output.C) put("C", *s.output.C);
    for (std::size_t j = 0; j < s.output.M.size(); ++j) put("M" + std::to_string(j + 1), s.output.M[j]);

    std::ofstream out(mf.path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + mf.path.string());
    out << "# qbt system manifest\nformat = qbt-manifest-1\n";
    out << "n = " << mf.n << "\nm = " << mf.m << "\np = " << mf.p << "\n";
    if (nu) out << "nu = " << *nu << "\n";
    for (const char* role : {"E", "A", "B", "C"})
        if (mf.files.count(role)) out << role << " = " << mf.files[role] << "\n";
    for (std::size_t j = 0; j < s.output.M.size(); ++j) {
        const std::string role = "M" + std::to_string(j + 1);
        out << role << " = " << mf.files[role] << "\n";
    }
    for (const auto& [k, v] : mf.tags) out << "tag." << k << " = " << v << "\n";
    for (const auto& [k, v] : extra) out << k << " = " << v << "\n";
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + mf.path.string());
    return mf;
}

}  // namespace qbt
