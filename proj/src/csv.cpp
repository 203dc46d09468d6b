#include "driveseg/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "driveseg/errors.hpp"

namespace driveseg {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

static std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

static double parse_cell(const std::string& cell, long row, const std::string& column) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw DataError("non-numeric cell '" + cell + "' at data row " + std::to_string(row) +
                        ", column '" + column + "'");
    return value;
}

MultivariateTimeSeries ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    const std::vector<std::string> header = split_csv_line(line);
    if (header.empty()) throw DataError("CSV header row is empty: " + path);

    const long n_cols = static_cast<long>(header.size());
    long label_col = -1, lat_col = -1, lon_col = -1;
    std::vector<long> channel_cols;
    std::vector<std::string> channel_names;
    for (long i = 0; i < n_cols; ++i) {
        const std::string& name = header[i];
        if (name == "t") continue;
        if (name == "label") {
            label_col = i;
        } else if (name == "lat") {
            lat_col = i;
        } else if (name == "lon") {
            lon_col = i;
        } else if (schema.channels.empty() ||
                   std::find(schema.channels.begin(), schema.channels.end(), name) !=
                       schema.channels.end()) {
            channel_cols.push_back(i);
            channel_names.push_back(name);
        }
    }
    if (!schema.channels.empty())
        for (const auto& want : schema.channels)
            if (std::find(channel_names.begin(), channel_names.end(), want) ==
                channel_names.end())
                throw DataError("requested channel '" + want + "' not present in " + path);
    if (channel_cols.empty()) throw DataError("no value channels selected from " + path);

    std::vector<std::vector<double>> values(channel_cols.size());
    std::vector<int> labels;
    std::vector<std::pair<double, double>> coords;
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const std::vector<std::string> cells = split_csv_line(line);
        if (static_cast<long>(cells.size()) != n_cols)
            throw DataError("ragged CSV row " + std::to_string(row) + " in " + path + ": got " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(n_cols));
        for (std::size_t c = 0; c < channel_cols.size(); ++c)
            values[c].push_back(parse_cell(cells[channel_cols[c]], row, channel_names[c]));
        if (label_col >= 0) {
            const double v = parse_cell(cells[label_col], row, "label");
            const int l = static_cast<int>(std::llround(v));
            if (std::abs(v - l) > 1e-9)
                throw DataError("label cell at data row " + std::to_string(row) +
                                " is not an integer");
            labels.push_back(l);
        }
        if (lat_col >= 0 && lon_col >= 0)
            coords.emplace_back(parse_cell(cells[lat_col], row, "lat"),
                                parse_cell(cells[lon_col], row, "lon"));
    }
    if (row == 0) throw DataError("CSV file has a header but no data rows: " + path);

    MultivariateTimeSeries series;
    series.channels = channel_names;
    series.sample_rate_hz = schema.sample_rate_hz;
    series.data.resize(static_cast<long>(channel_cols.size()), row);
    for (std::size_t c = 0; c < channel_cols.size(); ++c)
        for (long t = 0; t < row; ++t) series.data(static_cast<long>(c), t) = values[c][t];
    if (label_col >= 0) series.labels = std::move(labels);
    if (lat_col >= 0 && lon_col >= 0) series.coordinates = std::move(coords);
    series.validate();
    return series;
}

void export_csv(const MultivariateTimeSeries& series, const std::string& path) {
    series.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file: " + path);
    out << "t";
    for (const auto& name : series.channels) out << "," << name;
    if (series.labels) out << ",label";
    if (series.coordinates) out << ",lat,lon";
    out << "\n";
    for (long t = 0; t < series.data.cols(); ++t) {
        out << t;
        for (long c = 0; c < series.data.rows(); ++c)
            out << "," << format_double(series.data(c, t));
        if (series.labels) out << "," << (*series.labels)[t];
        if (series.coordinates)
            out << "," << format_double((*series.coordinates)[t].first) << ","
                << format_double((*series.coordinates)[t].second);
        out << "\n";
    }
    if (!out) throw DataError("failed while writing CSV file: " + path);
}

}  // namespace driveseg
