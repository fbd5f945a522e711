#pragma once

#include "errors.hpp"
#include "mesh.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sfmap {

enum class MeshFormat { OFF, OBJ, PLY };

namespace detail {

struct RawMesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<int, 3>> triangles;
};

// Polygons are fan-triangulated around their first corner.
inline void add_polygon(RawMesh& raw, const std::vector<int>& poly, const std::string& where)
{
    if (poly.size() < 3) throw ParseError(where + ": face with fewer than 3 vertices");
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) raw.triangles.push_back({poly[0], poly[i], poly[i + 1]});
}

// Next line that is neither blank nor a '#' comment.
inline bool next_content_line(std::istream& in, std::string& line)
{
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        return true;
    }
    return false;
}

inline RawMesh parse_off(std::istream& in)
{
    RawMesh raw;
    std::string line;
    if (!next_content_line(in, line)) throw ParseError("empty OFF file");
    std::istringstream head(line);
    std::string magic;
    head >> magic;
    if (magic != "OFF") throw ParseError("missing OFF header");
    long nv = -1, nf = -1, ne = 0;
    if (!(head >> nv)) {
        if (!next_content_line(in, line)) throw ParseError("OFF: missing counts");
        std::istringstream counts(line);
        counts >> nv >> nf >> ne;
    } else {
        head >> nf >> ne;
    }
    if (nv < 0 || nf < 0) throw ParseError("OFF: invalid counts");
    raw.vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        if (!next_content_line(in, line)) throw ParseError("OFF: truncated vertex list");
        std::istringstream ls(line);
        std::array<double, 3> p{};
        if (!(ls >> p[0] >> p[1] >> p[2])) throw ParseError("OFF: bad vertex line " + std::to_string(i));
        raw.vertices.push_back(p);
    }
    for (long f = 0; f < nf; ++f) {
        if (!next_content_line(in, line)) throw ParseError("OFF: truncated face list");
        std::istringstream ls(line);
        int k = 0;
        if (!(ls >> k) || k < 0) throw ParseError("OFF: bad face line " + std::to_string(f));
        std::vector<int> poly(k);
        for (auto& v : poly)
            if (!(ls >> v)) throw ParseError("OFF: bad face line " + std::to_string(f));
        add_polygon(raw, poly, "OFF face " + std::to_string(f));
    }
    return raw;
}

inline RawMesh parse_obj(std::istream& in)
{
    RawMesh raw;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            std::array<double, 3> p{};
            if (!(ls >> p[0] >> p[1] >> p[2])) throw ParseError("OBJ: bad vertex at line " + std::to_string(lineno));
            raw.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ls >> tok) {
                const auto slash = tok.find('/');
                const std::string head = tok.substr(0, slash);
                int idx = 0;
                try {
                    std::size_t used = 0;
                    idx = std::stoi(head, &used);
                    if (used != head.size()) throw std::invalid_argument(head);
                } catch (const std::exception&) {
                    throw ParseError("OBJ: bad face index '" + tok + "' at line " + std::to_string(lineno));
                }
                if (idx == 0) throw ParseError("OBJ: zero face index at line " + std::to_string(lineno));
                // negative indices count back from the most recent vertex
                poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(raw.vertices.size()) + idx);
            }
            add_polygon(raw, poly, "OBJ line " + std::to_string(lineno));
        }
    }
    return raw;
}

inline RawMesh parse_ply_ascii(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw ParseError("missing ply magic");

    struct Element {
        std::string name;
        long count = 0;
        std::vector<std::string> props;
        bool has_list = false;
    };
    std::vector<Element> elements;
    bool ascii = false;
    while (true) {
        if (!std::getline(in, line)) throw ParseError("PLY: truncated header");
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (tag == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) throw ParseError("PLY: property before element");
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string count_type, item_type, name;
                ls >> count_type >> item_type >> name;
                elements.back().has_list = true;
                elements.back().props.push_back(name);
            } else {
                std::string name;
                ls >> name;
                elements.back().props.push_back(name);
            }
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!ascii) throw ParseError("PLY: only ascii format is supported");

    RawMesh raw;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
                if (e.props[i] == "x") ix = i;
                if (e.props[i] == "y") iy = i;
                if (e.props[i] == "z") iz = i;
            }
            if (ix < 0 || iy < 0 || iz < 0) throw ParseError("PLY: vertex element lacks x/y/z");
            for (long i = 0; i < e.count; ++i) {
                if (!std::getline(in, line)) throw ParseError("PLY: truncated vertex list");
                std::istringstream ls(line);
                std::vector<double> vals;
                double x;
                while (ls >> x) vals.push_back(x);
                if (static_cast<int>(vals.size()) < static_cast<int>(e.props.size()))
                    throw ParseError("PLY: bad vertex line " + std::to_string(i));
                raw.vertices.push_back({vals[ix], vals[iy], vals[iz]});
            }
        } else if (e.name == "face") {
            for (long f = 0; f < e.count; ++f) {
                if (!std::getline(in, line)) throw ParseError("PLY: truncated face list");
                std::istringstream ls(line);
                int k = 0;
                if (!(ls >> k) || k < 0) throw ParseError("PLY: bad face line " + std::to_string(f));
                std::vector<int> poly(k);
                for (auto& v : poly)
                    if (!(ls >> v)) throw ParseError("PLY: bad face line " + std::to_string(f));
                add_polygon(raw, poly, "PLY face " + std::to_string(f));
            }
        } else {
            for (long i = 0; i < e.count; ++i)
                if (!std::getline(in, line)) throw ParseError("PLY: truncated element " + e.name);
        }
    }
    return raw;
}

} // namespace detail

inline MeshFormat format_from_extension(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".off") return MeshFormat::OFF;
    if (ext == ".obj") return MeshFormat::OBJ;
    if (ext == ".ply") return MeshFormat::PLY;
    throw ParseError("unknown mesh extension '" + ext + "'");
}

/// Parses a mesh from a stream. Vertex order is preserved; isolated vertices are
/// dropped from the compact index space (see TriMesh::original_index()).
inline TriMesh read_mesh(std::istream& in, MeshFormat format)
{
    detail::RawMesh raw;
    switch (format) {
    case MeshFormat::OFF: raw = detail::parse_off(in); break;
    case MeshFormat::OBJ: raw = detail::parse_obj(in); break;
    case MeshFormat::PLY: raw = detail::parse_ply_ascii(in); break;
    }
    if (raw.vertices.size() < 4) throw ParseError("mesh needs at least 4 vertices");
    if (raw.triangles.empty()) throw ParseError("mesh has no faces");

    Points v(raw.vertices.size(), 3);
    for (std::size_t i = 0; i < raw.vertices.size(); ++i)
        v.row(static_cast<Eigen::Index>(i)) << raw.vertices[i][0], raw.vertices[i][1], raw.vertices[i][2];
    Triangles t(raw.triangles.size(), 3);
    for (std::size_t i = 0; i < raw.triangles.size(); ++i)
        t.row(static_cast<Eigen::Index>(i)) << raw.triangles[i][0], raw.triangles[i][1], raw.triangles[i][2];
    return TriMesh::from_arrays(std::move(v), std::move(t));
}

inline TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_mesh(in, format);
}

inline TriMesh load_mesh(const std::filesystem::path& path)
{
    return load_mesh(path, format_from_extension(path));
}

} // namespace sfmap
