#pragma once

#include "errors.hpp"
#include "fmap.hpp"
#include "geodesic.hpp"
#include "local_basis.hpp"
#include "spectral.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sfmap {

static_assert(std::endian::native == std::endian::little, "binary files are written in native little-endian order");

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

// Binary container: 4-byte magic, payload, FNV-1a checksum of the payload.
class BinaryWriter {
public:
    explicit BinaryWriter(std::string_view magic) : magic_(magic) {}

    template <class T>
    void put(T value)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        payload_.append(reinterpret_cast<const char*>(&value), sizeof(T));
    }
    void put_doubles(const double* data, std::size_t count)
    {
        payload_.append(reinterpret_cast<const char*>(data), count * sizeof(double));
    }
    void put_matrix(const Eigen::MatrixXd& m)
    {
        put<std::int64_t>(m.rows());
        put<std::int64_t>(m.cols());
        put_doubles(m.data(), static_cast<std::size_t>(m.size()));
    }
    void put_ints(const std::vector<int>& v)
    {
        put<std::int64_t>(static_cast<std::int64_t>(v.size()));
        for (int x : v) put<std::int64_t>(x);
    }

    std::string bytes() const
    {
        std::string out = magic_ + payload_;
        const std::uint64_t sum = fnv1a(payload_);
        out.append(reinterpret_cast<const char*>(&sum), sizeof(sum));
        return out;
    }

    void save(const std::filesystem::path& path) const
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        const auto b = bytes();
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
        if (!out) throw CacheError("cannot write " + path.string());
    }

private:
    std::string magic_;
    std::string payload_;
};

class BinaryReader {
public:
    BinaryReader(std::string bytes, std::string_view magic, std::string what) : what_(std::move(what))
    {
        constexpr auto tail = sizeof(std::uint64_t);
        if (bytes.size() < magic.size() + tail || bytes.compare(0, magic.size(), magic) != 0)
            throw CacheError(what_ + ": bad magic or truncated file");
        std::uint64_t stored;
        std::memcpy(&stored, bytes.data() + bytes.size() - tail, tail);
        payload_ = bytes.substr(magic.size(), bytes.size() - magic.size() - tail);
        if (fnv1a(payload_) != stored) throw CacheError(what_ + ": checksum mismatch");
    }

    static BinaryReader open(const std::filesystem::path& path, std::string_view magic)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw CacheError("cannot open " + path.string());
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return BinaryReader(std::move(bytes), magic, path.string());
    }

    template <class T>
    T get()
    {
        need(sizeof(T));
        T value;
        std::memcpy(&value, payload_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    void get_doubles(double* data, std::size_t count)
    {
        need(count * sizeof(double));
        std::memcpy(data, payload_.data() + pos_, count * sizeof(double));
        pos_ += count * sizeof(double);
    }
    Eigen::MatrixXd get_matrix()
    {
        const auto rows = get<std::int64_t>(), cols = get<std::int64_t>();
        if (rows < 0 || cols < 0) throw CacheError(what_ + ": negative matrix size");
        need(static_cast<std::size_t>(rows * cols) * sizeof(double));
        Eigen::MatrixXd m(rows, cols);
        get_doubles(m.data(), static_cast<std::size_t>(m.size()));
        return m;
    }
    std::vector<int> get_ints()
    {
        const auto count = get<std::int64_t>();
        if (count < 0) throw CacheError(what_ + ": negative length");
        need(static_cast<std::size_t>(count) * sizeof(std::int64_t));
        std::vector<int> v(static_cast<std::size_t>(count));
        for (auto& x : v) x = static_cast<int>(get<std::int64_t>());
        return v;
    }
    void finish() const
    {
        if (pos_ != payload_.size()) throw CacheError(what_ + ": trailing bytes");
    }

private:
    void need(std::size_t bytes) const
    {
        if (pos_ + bytes > payload_.size()) throw CacheError(what_ + ": truncated payload");
    }

    std::string what_;
    std::string payload_;
    std::size_t pos_ = 0;
};

// ---- pointwise maps (text) ----

inline void write_map(std::ostream& out, const PointwiseMap& map)
{
    for (int t : map.assignment) out << t << '\n';
}

inline PointwiseMap read_map(std::istream& in, const std::string& what = "map")
{
    PointwiseMap map;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        long long v;
        std::string rest;
        if (!(ls >> v) || (ls >> rest) || v < -1 || v > std::numeric_limits<int>::max())
            throw ParseError(what + " line " + std::to_string(line_no) + ": expected one index, got '" + line + "'");
        map.assignment.push_back(static_cast<int>(v));
    }
    return map;
}

inline void save_map(const std::filesystem::path& path, const PointwiseMap& map)
{
    std::ofstream out(path, std::ios::trunc);
    write_map(out, map);
    if (!out) throw Error("cannot write " + path.string());
}

inline PointwiseMap load_map(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_map(in, path.string());
}

/// Sample-index table accompanying a sample map.
inline void write_sample_table(std::ostream& out, const SampleSet& source, const SampleSet& target)
{
    out << "source " << source.size() << '\n';
    for (int v : source.indices) out << v << '\n';
    out << "target " << target.size() << '\n';
    for (int v : target.indices) out << v << '\n';
}

// ---- functional maps ----

inline void write_fmap_text(std::ostream& out, const Eigen::MatrixXd& C)
{
    out.precision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index r = 0; r < C.rows(); ++r) {
        for (Eigen::Index c = 0; c < C.cols(); ++c) out << (c ? " " : "") << C(r, c);
        out << '\n';
    }
}

inline Eigen::MatrixXd read_fmap_text(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) throw ParseError("functional map: bad number in '" + line + "'");
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("functional map: ragged rows");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd C(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (Eigen::Index r = 0; r < C.rows(); ++r)
        for (Eigen::Index c = 0; c < C.cols(); ++c) C(r, c) = rows[r][c];
    return C;
}

inline BinaryWriter fmap_binary(const FunctionalMap& fm)
{
    BinaryWriter w("SFFM");
    w.put<std::int32_t>(static_cast<std::int32_t>(fm.kind));
    w.put_matrix(fm.C);
    return w;
}

inline FunctionalMap fmap_from_binary(BinaryReader r)
{
    FunctionalMap fm;
    const auto kind = r.get<std::int32_t>();
    if (kind < 0 || kind > static_cast<std::int32_t>(FmapKind::RestrictedReweighted))
        throw CacheError("functional map: unknown kind");
    fm.kind = static_cast<FmapKind>(kind);
    fm.C = r.get_matrix();
    r.finish();
    return fm;
}

inline void save_fmap_binary(const std::filesystem::path& path, const FunctionalMap& fm) { fmap_binary(fm).save(path); }

inline FunctionalMap load_fmap_binary(const std::filesystem::path& path)
{
    return fmap_from_binary(BinaryReader::open(path, "SFFM"));
}

// ---- local basis and spectrum caches ----

inline void save_basis(const std::filesystem::path& path, const LocalBasis& basis)
{
    BinaryWriter w("SFLB");
    SparseMatrix U = basis.U;
    U.makeCompressed();
    w.put<std::int64_t>(U.rows());
    w.put<std::int64_t>(U.cols());
    w.put<double>(basis.self_weight_threshold);
    w.put<std::int32_t>(static_cast<std::int32_t>(basis.profile));
    w.put<std::int64_t>(U.nonZeros());
    for (Eigen::Index j = 0; j <= U.cols(); ++j) w.put<std::int64_t>(U.outerIndexPtr()[j]);
    for (Eigen::Index e = 0; e < U.nonZeros(); ++e) w.put<std::int64_t>(U.innerIndexPtr()[e]);
    w.put_doubles(U.valuePtr(), static_cast<std::size_t>(U.nonZeros()));
    w.put_ints(basis.samples.indices);
    w.put<std::int64_t>(static_cast<std::int64_t>(basis.samples.radii.size()));
    w.put_doubles(basis.samples.radii.data(), basis.samples.radii.size());
    w.put<double>(basis.samples.initial_radius);
    w.put_doubles(basis.self_weights.data(), static_cast<std::size_t>(basis.self_weights.size()));
    w.save(path);
}

inline LocalBasis load_basis(const std::filesystem::path& path)
{
    auto r = BinaryReader::open(path, "SFLB");
    const auto n = r.get<std::int64_t>(), p = r.get<std::int64_t>();
    LocalBasis b;
    b.self_weight_threshold = r.get<double>();
    const auto profile = r.get<std::int32_t>();
    if (n <= 0 || p <= 0 || (profile != 0 && profile != 1)) throw CacheError(path.string() + ": bad header");
    b.profile = static_cast<ChiKind>(profile);
    const auto nnz = r.get<std::int64_t>();
    if (nnz < 0) throw CacheError(path.string() + ": bad header");
    std::vector<Triplet> triplets;
    std::vector<std::int64_t> outer(static_cast<std::size_t>(p + 1)), inner(static_cast<std::size_t>(nnz));
    for (auto& x : outer) x = r.get<std::int64_t>();
    for (auto& x : inner) x = r.get<std::int64_t>();
    std::vector<double> values(static_cast<std::size_t>(nnz));
    r.get_doubles(values.data(), values.size());
    if (outer.front() != 0 || outer.back() != nnz) throw CacheError(path.string() + ": bad column pointers");
    for (std::int64_t j = 0; j < p; ++j) {
        if (outer[j] > outer[j + 1]) throw CacheError(path.string() + ": bad column pointers");
        for (auto e = outer[j]; e < outer[j + 1]; ++e) {
            if (inner[e] < 0 || inner[e] >= n) throw CacheError(path.string() + ": row index out of range");
            triplets.emplace_back(static_cast<int>(inner[e]), static_cast<int>(j), values[e]);
        }
    }
    b.U.resize(n, p);
    b.U.setFromTriplets(triplets.begin(), triplets.end());
    b.samples.indices = r.get_ints();
    const auto radii = r.get<std::int64_t>();
    if (radii != p || static_cast<std::int64_t>(b.samples.indices.size()) != p)
        throw CacheError(path.string() + ": sample table size");
    b.samples.radii.resize(static_cast<std::size_t>(p));
    r.get_doubles(b.samples.radii.data(), b.samples.radii.size());
    b.samples.initial_radius = r.get<double>();
    b.self_weights.resize(p);
    r.get_doubles(b.self_weights.data(), static_cast<std::size_t>(p));
    r.finish();
    return b;
}

/// Eigenvalues and coefficient vectors only; the reduced operators are rebuilt from the basis.
inline void save_spectrum(const std::filesystem::path& path, const ReducedSpectrum& s, std::int64_t vertex_count)
{
    BinaryWriter w("SFRS");
    w.put<std::int64_t>(vertex_count);
    w.put<std::int64_t>(s.coeffs.rows());
    w.put<std::int64_t>(s.coeffs.cols());
    w.put_doubles(s.eigenvalues.data(), static_cast<std::size_t>(s.eigenvalues.size()));
    w.put_doubles(s.coeffs.data(), static_cast<std::size_t>(s.coeffs.size()));
    w.save(path);
}

struct StoredSpectrum {
    std::int64_t vertex_count = 0;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd coeffs;
};

inline StoredSpectrum load_spectrum(const std::filesystem::path& path)
{
    auto r = BinaryReader::open(path, "SFRS");
    StoredSpectrum s;
    s.vertex_count = r.get<std::int64_t>();
    const auto p = r.get<std::int64_t>(), K = r.get<std::int64_t>();
    if (p <= 0 || K <= 0 || K > p) throw CacheError(path.string() + ": bad header");
    s.eigenvalues.resize(K);
    r.get_doubles(s.eigenvalues.data(), static_cast<std::size_t>(K));
    s.coeffs.resize(p, K);
    r.get_doubles(s.coeffs.data(), static_cast<std::size_t>(p * K));
    r.finish();
    return s;
}

} // namespace sfmap
