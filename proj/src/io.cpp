#include "tsp/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unistd.h>

namespace tsp::io {

namespace fs = std::filesystem;

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write(const std::string& path, const std::string& content)
{
    const fs::path target(path);
    if (target.has_parent_path())
        fs::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot open '" + tmp + "' for writing");
        out.write(content.data(), std::streamsize(content.size()));
        out.flush();
        if (!out)
            throw Error("failed writing '" + tmp + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

std::string digest(const std::string& content)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : content) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

void append_double(std::string& out, double v)
{
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, std::size_t(len));
}

std::string fmt(double v)
{
    std::string s;
    append_double(s, v);
    return s;
}

struct LineCursor {
    const std::string& text;
    std::size_t pos = 0;
    std::size_t line = 0;

    bool next(std::string_view& out)
    {
        if (pos >= text.size())
            return false;
        const auto end = text.find('\n', pos);
        const auto stop = end == std::string::npos ? text.size() : end;
        out = std::string_view(text).substr(pos, stop - pos);
        if (!out.empty() && out.back() == '\r')
            out.remove_suffix(1);
        pos = stop + 1;
        ++line;
        return true;
    }
};

bool blank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

double parse_double(std::string_view field, const std::string& source, std::size_t line, std::size_t col)
{
    const auto b = field.find_first_not_of(" \t");
    if (b == std::string_view::npos)
        throw ParseError(source, line, col, "empty field");
    const auto e = field.find_last_not_of(" \t");
    const auto tok = field.substr(b, e - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(source, line, col + b, "malformed number '" + std::string(tok) + "'");
    return v;
}

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
        const auto b = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t')
            ++i;
        if (i > b)
            out.push_back(s.substr(b, i - b));
    }
    return out;
}

long parse_long(std::string_view tok, const std::string& source, std::size_t line, std::size_t col)
{
    long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(source, line, col, "malformed integer '" + std::string(tok) + "'");
    return v;
}

} // namespace

std::string format_matrix_csv(const MatrixXd& M)
{
    std::string out;
    out.reserve(std::size_t(M.size()) * 24);
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) {
            if (j)
                out.push_back(',');
            append_double(out, M(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

MatrixXd parse_matrix_csv(const std::string& text, const std::string& source)
{
    std::vector<double> values;
    Index cols = -1;
    Index rows = 0;
    LineCursor cur{text};
    std::string_view line;
    while (cur.next(line)) {
        if (blank(line))
            continue;
        Index count = 0;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            const auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            values.push_back(parse_double(field, source, cur.line, start + 1));
            ++count;
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (cols < 0)
            cols = count;
        else if (count != cols)
            throw ParseError(source, cur.line, 1,
                             "row has " + std::to_string(count) + " fields, expected " + std::to_string(cols));
        ++rows;
    }
    if (rows == 0)
        return MatrixXd(0, 0);
    MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            M(i, j) = values[std::size_t(i * cols + j)];
    return M;
}

namespace {

template <class T>
void put_le(std::string& out, T v)
{
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf, buf + sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t offset)
{
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, in.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

constexpr char kMagic[4] = {'T', 'S', 'P', '1'};

} // namespace

std::string format_matrix_binary(const MatrixXd& M)
{
    std::string out(kMagic, 4);
    put_le<std::uint64_t>(out, std::uint64_t(M.rows()));
    put_le<std::uint64_t>(out, std::uint64_t(M.cols()));
    for (Index i = 0; i < M.rows(); ++i)
        for (Index j = 0; j < M.cols(); ++j)
            put_le<double>(out, M(i, j));
    return out;
}

MatrixXd parse_matrix_binary(const std::string& bytes, const std::string& source)
{
    if (bytes.size() < 20 || bytes.compare(0, 4, kMagic, 4) != 0)
        throw ParseError(source, 1, 1, "missing TSP1 header");
    const auto rows = get_le<std::uint64_t>(bytes, 4);
    const auto cols = get_le<std::uint64_t>(bytes, 12);
    if (bytes.size() != 20 + rows * cols * 8)
        throw ParseError(source, 1, 1, "payload size does not match " + std::to_string(rows) + "x" +
                                           std::to_string(cols));
    MatrixXd M(static_cast<Index>(rows), static_cast<Index>(cols));
    std::size_t off = 20;
    for (Index i = 0; i < M.rows(); ++i)
        for (Index j = 0; j < M.cols(); ++j, off += 8)
            M(i, j) = get_le<double>(bytes, off);
    return M;
}

MatrixXd read_matrix(const std::string& path)
{
    const std::string content = read_file(path);
    if (content.size() >= 4 && content.compare(0, 4, kMagic, 4) == 0)
        return parse_matrix_binary(content, path);
    return parse_matrix_csv(content, path);
}

void write_matrix(const std::string& path, const MatrixXd& M)
{
    const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
    atomic_write(path, binary ? format_matrix_binary(M) : format_matrix_csv(M));
}

VectorXd read_vector(const std::string& path)
{
    const MatrixXd M = read_matrix(path);
    if (M.cols() == 1)
        return M.col(0);
    if (M.rows() == 1)
        return M.row(0).transpose();
    throw DimensionError("'" + path + "' holds a " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                         " matrix, expected a vector");
}

std::string format_mask(const GridMask& mask)
{
    const auto d = mask.dims();
    std::string out = "dims " + std::to_string(d.nx) + " " + std::to_string(d.ny) + " " + std::to_string(d.nz) + "\n";
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (x)
                    out.push_back(' ');
                out.push_back(mask.included({x, y, z}) ? '1' : '0');
            }
            out.push_back('\n');
        }
    return out;
}

GridMask parse_mask(const std::string& text, const std::string& source)
{
    LineCursor cur{text};
    std::string_view line;
    GridDims dims{};
    bool have_dims = false;
    std::vector<bool> cells;
    while (cur.next(line)) {
        if (blank(line))
            continue;
        const auto toks = split_ws(line);
        if (!have_dims) {
            if (toks.size() != 4 || toks[0] != "dims")
                throw ParseError(source, cur.line, 1, "expected header 'dims nx ny nz'");
            dims = {int(parse_long(toks[1], source, cur.line, 6)), int(parse_long(toks[2], source, cur.line, 6)),
                    int(parse_long(toks[3], source, cur.line, 6))};
            if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
                throw ParseError(source, cur.line, 1, "dimensions must be >= 1");
            have_dims = true;
            continue;
        }
        for (const auto& t : toks) {
            if (t != "0" && t != "1")
                throw ParseError(source, cur.line, std::size_t(t.data() - line.data()) + 1,
                                 "mask cells must be 0 or 1, got '" + std::string(t) + "'");
            cells.push_back(t == "1");
        }
    }
    if (!have_dims)
        throw ParseError(source, 1, 1, "missing 'dims' header");
    if (Index(cells.size()) != dims.cells())
        throw ParseError(source, cur.line, 1,
                         "mask has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(dims.cells()));
    return GridMask(dims, std::move(cells));
}

std::string format_tree(const ClusterTree& tree)
{
    std::string out;
    for (Index j = 0; j < tree.num_nodes(); ++j) {
        const auto& n = tree.node(j);
        out += std::to_string(j + 1);
        if (n.is_leaf())
            out += " leaf 0 0 ";
        else
            out += " internal " + std::to_string(n.left + 1) + " " + std::to_string(n.right + 1) + " ";
        out += std::to_string(n.depth) + " " + std::to_string(n.size) + " ";
        append_double(out, n.delta);
        out.push_back('\n');
    }
    return out;
}

ClusterTree parse_tree(const std::string& text, const std::string& source)
{
    struct Row {
        bool leaf;
        long c1, c2, depth, size;
        double delta;
        std::size_t line;
    };
    std::vector<Row> rows;
    LineCursor cur{text};
    std::string_view line;
    while (cur.next(line)) {
        if (blank(line) || line.front() == '#')
            continue;
        const auto t = split_ws(line);
        if (t.size() != 7)
            throw ParseError(source, cur.line, 1, "expected 7 fields 'id kind child1 child2 depth size delta'");
        const long id = parse_long(t[0], source, cur.line, 1);
        if (id != long(rows.size()) + 1)
            throw ParseError(source, cur.line, 1, "node ids must be consecutive from 1");
        if (t[1] != "leaf" && t[1] != "internal")
            throw ParseError(source, cur.line, std::size_t(t[1].data() - line.data()) + 1, "kind must be leaf or internal");
        auto col = [&](int k) { return std::size_t(t[std::size_t(k)].data() - line.data()) + 1; };
        rows.push_back({t[1] == "leaf", parse_long(t[2], source, cur.line, col(2)), parse_long(t[3], source, cur.line, col(3)),
                        parse_long(t[4], source, cur.line, col(4)), parse_long(t[5], source, cur.line, col(5)),
                        parse_double(t[6], source, cur.line, col(6)), cur.line});
    }
    if (rows.empty() || rows.size() % 2 == 0)
        throw ParseError(source, cur.line, 1, "a binary tree needs an odd, positive node count");
    const Index p = Index(rows.size() + 1) / 2;
    std::vector<Merge> merges;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        const bool should_be_leaf = Index(k) < p;
        if (r.leaf != should_be_leaf)
            throw ParseError(source, r.line, 1, should_be_leaf ? "expected a leaf" : "expected an internal node");
        if (!r.leaf)
            merges.push_back({Index(r.c1 - 1), Index(r.c2 - 1), r.delta});
    }
    try {
        ClusterTree tree(p, merges);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto& n = tree.node(Index(k));
            if (n.depth != rows[k].depth || n.size != rows[k].size)
                throw ParseError(source, rows[k].line, 1, "depth/size inconsistent with the tree structure");
        }
        return tree;
    } catch (const StructureError& e) {
        throw ParseError(source, 1, 1, e.what());
    }
}

std::string format_groups(const GroupStructure& gs)
{
    std::string out;
    for (Index g = 0; g < gs.num_groups(); ++g) {
        append_double(out, gs.weight(g));
        for (Index i : gs.group(g))
            out += " " + std::to_string(i + 1);
        out.push_back('\n');
    }
    return out;
}

MatrixXd voxel_map_grid(const VectorXd& map, const GridMask& mask)
{
    if (map.size() != mask.num_voxels())
        throw DimensionError("voxel map has " + std::to_string(map.size()) + " entries, mask has " +
                             std::to_string(mask.num_voxels()) + " voxels");
    const auto d = mask.dims();
    MatrixXd img = MatrixXd::Zero(Index(d.ny) * d.nz, d.nx);
    for (Index v = 0; v < map.size(); ++v) {
        const Coord c = mask.coord(v);
        img(Index(c.z) * d.ny + c.y, c.x) = map[v];
    }
    return img;
}

std::string format_pgm(const MatrixXd& image)
{
    const double lo = image.size() ? image.minCoeff() : 0.0;
    const double hi = image.size() ? image.maxCoeff() : 0.0;
    std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
    for (Index i = 0; i < image.rows(); ++i)
        for (Index j = 0; j < image.cols(); ++j) {
            const double t = hi > lo ? (image(i, j) - lo) / (hi - lo) : 0.0;
            out.push_back(char(static_cast<unsigned char>(std::lround(255.0 * t))));
        }
    return out;
}

std::string format_pgm_scale(const MatrixXd& image)
{
    const double lo = image.size() ? image.minCoeff() : 0.0;
    const double hi = image.size() ? image.maxCoeff() : 0.0;
    return "min " + fmt(lo) + "\nmax " + fmt(hi) + "\n# value = min + pixel / 255 * (max - min)\n";
}

std::string format_fit_json(const FitResult& r, const std::string& coef_path, const std::string& manifest_path)
{
    nlohmann::ordered_json j;
    j["format"] = "tsp-fit-1";
    j["loss"] = to_string(r.loss);
    j["penalty"] = r.penalty;
    j["lambda"] = r.lambda;
    j["lipschitz"] = r.lipschitz;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["augmented"] = r.augmented;
    j["rows"] = r.W.rows();
    j["cols"] = r.W.cols();
    j["intercept"] = std::vector<double>(r.b.data(), r.b.data() + r.b.size());
    j["classes"] = r.classes;
    j["objective"] = r.objective;
    j["stage_ends"] = r.stage_ends;
    j["coefficients"] = coef_path;
    j["manifest"] = manifest_path;
    return j.dump(2) + "\n";
}

FitResult parse_fit_json(const std::string& text, const std::string& base_dir)
{
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "tsp-fit-1")
        throw Error("not a tsp fit result");
    FitResult r;
    r.loss = parse_loss(j.at("loss").get<std::string>());
    r.penalty = j.at("penalty").get<std::string>();
    r.lambda = j.at("lambda").get<double>();
    r.lipschitz = j.at("lipschitz").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.augmented = j.at("augmented").get<bool>();
    const auto b = j.at("intercept").get<std::vector<double>>();
    r.b = Eigen::Map<const VectorXd>(b.data(), Index(b.size()));
    r.classes = j.at("classes").get<std::vector<double>>();
    r.objective = j.at("objective").get<std::vector<double>>();
    r.stage_ends = j.at("stage_ends").get<std::vector<int>>();
    fs::path coef(j.at("coefficients").get<std::string>());
    if (coef.is_relative())
        coef = fs::path(base_dir) / coef;
    r.W = read_matrix(coef.string());
    if (r.W.rows() != j.at("rows").get<Index>() || r.W.cols() != j.at("cols").get<Index>())
        throw DimensionError("coefficient sidecar shape does not match the fit record");
    return r;
}

std::string format_report_csv(const EvalReport& r)
{
    std::string out = "model,metric,fold,error,lambda,nonzero_pct\n";
    for (std::size_t f = 0; f < r.fold_errors.size(); ++f)
        out += r.model + "," + r.metric + "," + std::to_string(f) + "," + fmt(r.fold_errors[f]) + "," +
               fmt(r.chosen_lambda[f]) + "," + fmt(r.nonzero_pct[f]) + "\n";
    return out;
}

std::vector<EvalReport> parse_report_csv(const std::string& text, const std::string& source)
{
    std::vector<EvalReport> out;
    std::map<std::string, std::size_t> slot;
    LineCursor cur{text};
    std::string_view line;
    while (cur.next(line)) {
        if (blank(line) || line.starts_with("model,"))
            continue;
        std::vector<std::string_view> f;
        std::size_t start = 0;
        for (;;) {
            const auto c = line.find(',', start);
            f.push_back(line.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
            if (c == std::string_view::npos)
                break;
            start = c + 1;
        }
        if (f.size() != 6)
            throw ParseError(source, cur.line, 1, "expected 6 fields");
        const std::string model(f[0]);
        auto it = slot.find(model);
        if (it == slot.end()) {
            it = slot.emplace(model, out.size()).first;
            out.push_back({});
            out.back().model = model;
            out.back().metric = std::string(f[1]);
        }
        auto& r = out[it->second];
        const auto col = [&](std::size_t k) { return std::size_t(f[k].data() - line.data()) + 1; };
        r.fold_errors.push_back(parse_double(f[3], source, cur.line, col(3)));
        r.chosen_lambda.push_back(parse_double(f[4], source, cur.line, col(4)));
        r.nonzero_pct.push_back(parse_double(f[5], source, cur.line, col(5)));
    }
    for (auto& r : out)
        r.summarize();
    return out;
}

std::string format_report_table(const std::vector<EvalReport>& reports, const std::vector<double>& p_values,
                                bool with_time)
{
    std::size_t width = 5;
    for (const auto& r : reports)
        width = std::max(width, r.model.size());
    std::ostringstream out;
    out << std::left << std::setw(int(width)) << "model" << std::right << std::setw(12) << "mean" << std::setw(12)
        << "std" << std::setw(14) << "nonzero%" << std::setw(10) << "p-value";
    if (with_time)
        out << std::setw(10) << "time(s)";
    out << "\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        out << std::left << std::setw(int(width)) << r.model << std::right << std::fixed << std::setprecision(4)
            << std::setw(12) << r.mean << std::setw(12) << r.stddev << std::setprecision(2) << std::setw(14)
            << r.median_nonzero_pct;
        if (i < p_values.size() && !std::isnan(p_values[i]))
            out << std::setprecision(4) << std::setw(10) << p_values[i];
        else
            out << std::setw(10) << "-";
        if (with_time)
            out << std::setprecision(2) << std::setw(10) << r.wall_time_s;
        out << "\n";
    }
    return out.str();
}

} // namespace tsp::io
