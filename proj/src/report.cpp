#include "kbl/report.hpp"

#include "kbl/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace kbl {

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string to_csv(const Table& t)
{
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i) out += ',';
        out += t.columns[i];
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            if (const auto* d = std::get_if<double>(&row[i]))
                out += format_double(*d);
            else if (const auto* k = std::get_if<long long>(&row[i]))
                out += std::to_string(*k);
            else
                out += std::get<std::string>(row[i]);
        }
        out += '\n';
    }
    return out;
}

json finite_or_null(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        os << contents;
        if (!os.flush()) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_json(const std::filesystem::path& path, const json& j)
{
    write_file_atomic(path, j.dump(2) + "\n");
}

void write_csv(const std::filesystem::path& dir, const Table& t)
{
    write_file_atomic(dir / (t.name + ".csv"), to_csv(t));
}

} // namespace kbl
