#pragma once

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedcorr/dataset.hpp"

namespace fedcorr {

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

inline bool parse_double(const std::string& s, double& out)
{
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    out = std::strtod(begin, &end);
    if (end == begin || errno == ERANGE)
        return false;
    while (*end == ' ' || *end == '\t' || *end == '\r')
        ++end;
    return *end == '\0';
}

} // namespace detail

// Tabular dataset ingestion. Row format: label, then the feature values; an
// optional header row is skipped when its first cell is not numeric. Given
// labels start equal to the true labels; noise is applied downstream.
inline Dataset ingest_csv(const std::string& path, int n_classes)
{
    if (n_classes < 2)
        throw ParameterError("ingest_csv: n_classes must be >= 2");
    std::ifstream in(path);
    if (!in)
        throw IoError("ingest_csv: cannot open " + path);

    Dataset ds;
    ds.n_classes = n_classes;
    std::string line;
    std::size_t line_no = 0, dim = 0;
    bool header_allowed = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        auto cells = detail::split_csv_row(line);
        double label_val = 0.0;
        if (header_allowed) {
            header_allowed = false;
            if (!detail::parse_double(cells[0], label_val))
                continue; // single optional header row
        }
        if (cells.size() < 2)
            throw IoError("ingest_csv: line " + std::to_string(line_no) + ": need label plus features");
        if (!detail::parse_double(cells[0], label_val))
            throw IoError("ingest_csv: line " + std::to_string(line_no) + ": non-numeric label");
        const int label = static_cast<int>(label_val);
        if (static_cast<double>(label) != label_val || label < 0 || label >= n_classes)
            throw IoError("ingest_csv: line " + std::to_string(line_no) + ": label out of range [0, " +
                          std::to_string(n_classes) + ")");
        std::vector<double> row(cells.size() - 1);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            if (!detail::parse_double(cells[j], row[j - 1]))
                throw IoError("ingest_csv: line " + std::to_string(line_no) + ": non-numeric cell " +
                              std::to_string(j));
        }
        if (dim == 0)
            dim = row.size();
        else if (row.size() != dim)
            throw IoError("ingest_csv: line " + std::to_string(line_no) + ": ragged row (" +
                          std::to_string(row.size()) + " features, expected " + std::to_string(dim) + ")");
        ds.features.push_back(std::move(row));
        ds.true_labels.push_back(label);
    }
    if (ds.features.empty())
        throw IoError("ingest_csv: no data rows in " + path);
    ds.given_labels = ds.true_labels;
    return ds;
}

// Inverse of ingest_csv: writes given labels and features with a header row.
inline void export_dataset_csv(const Dataset& ds, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("export_dataset_csv: cannot open " + path);
    out << "label";
    for (std::size_t j = 0; j < ds.dim(); ++j)
        out << ",f" << j;
    out << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.given_labels[i];
        for (double v : ds.features[i])
            out << "," << format_double(v);
        out << "\n";
    }
    if (!out)
        throw IoError("export_dataset_csv: write failed for " + path);
}

} // namespace fedcorr
