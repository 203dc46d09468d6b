#pragma once

#include <optional>
#include <string>
#include <vector>

#include "driveseg/timeseries.hpp"

namespace driveseg {

/// Column selection for CSV ingestion. Columns named "t" are skipped,
/// "label" populates the label sequence, "lat"/"lon" populate the
/// coordinates. Everything else is a value channel unless `channels`
/// restricts the selection.
struct CsvSchema {
    std::vector<std::string> channels;  // empty = take all non-reserved columns
    double sample_rate_hz = 1.0;
};

MultivariateTimeSeries ingest_csv(const std::string& path, const CsvSchema& schema);

/// Mirrors the ingest format: header row, optional t/label/lat/lon
/// columns, values printed at full (round-trip) precision.
void export_csv(const MultivariateTimeSeries& series, const std::string& path);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace driveseg
