#pragma once

#include <string>
#include <vector>

#include "graphmem/types.hpp"

namespace graphmem {

constexpr int kDatasetFormatVersion = 1;

struct DatasetHeader {
    int format_version = kDatasetFormatVersion;
    int d_raw = 0;
    std::vector<std::string> action_type_names;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Episode> episodes;
};

/// Line-delimited records: header first, then per episode its observation
/// records followed by one episode record.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string dataset_to_string(const Dataset& ds);
Dataset dataset_from_string(const std::string& text);

}  // namespace graphmem
