#include "maka/attribution.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "maka/error.hpp"
#include "maka/io.hpp"

namespace maka {

using json = nlohmann::json;

std::string AttributionMap::column_label(std::size_t j) const {
    if (j < prompt_meta.size())
        return prompt_meta[j].attribute + ":" + std::to_string(prompt_meta[j].template_id);
    return "p" + std::to_string(j);
}

AttributionMap build_map(const std::string& video_id, const CategoryEntry& category,
                         const RelevancyTensor& tensor, std::size_t b, std::size_t k) {
    if (b >= tensor.batch || k >= tensor.categories)
        fail("NotCaptured", "no relevancy cell for (" + std::to_string(b) + ", " +
                                std::to_string(k) + ")");
    const RelevancyCell& cell = tensor.cell(b, k);
    if (cell.scores.empty())
        fail("NotCaptured", "relevancy tensor was not retained for this pair");
    if (!category.meta.empty() && category.meta.size() != cell.n_t)
        fail("ShapeMismatch", "category '" + category.name + "' has " +
                                  std::to_string(category.meta.size()) + " prompt entries vs " +
                                  std::to_string(cell.n_t) + " captured columns");

    AttributionMap map;
    map.video_id = video_id;
    map.category = category.id;
    map.n_v = cell.n_v;
    map.n_t = cell.n_t;
    map.prompt_meta = category.meta;
    // captured cell is prompt-major; the grid is frame-major
    map.grid.resize(cell.n_v * cell.n_t);
    for (std::size_t t = 0; t < cell.n_t; ++t)
        for (std::size_t v = 0; v < cell.n_v; ++v) map.grid[v * cell.n_t + t] = cell.at(t, v);
    map.row_argmax = cell.v2t_argmax;
    map.col_argmax = cell.t2v_argmax;
    return map;
}

std::vector<std::vector<std::uint32_t>> top_prompts_per_frame(const AttributionMap& map,
                                                              std::size_t k) {
    if (k < 1) fail("BadParams", "top_prompts_per_frame: k must be >= 1");
    std::vector<std::vector<std::uint32_t>> out(map.n_v);
    std::vector<std::uint32_t> order(map.n_t);
    for (std::size_t i = 0; i < map.n_v; ++i) {
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return map.at(i, a) > map.at(i, b);
        });
        order.resize(std::min(k, order.size()));
        out[i] = order;
        order.resize(map.n_t);
    }
    return out;
}

std::string to_csv(const AttributionMap& map) {
    std::string out;
    for (std::size_t j = 0; j < map.n_t; ++j) {
        if (j) out.push_back(',');
        out += map.column_label(j);
    }
    out.push_back('\n');
    char buf[32];
    for (std::size_t i = 0; i < map.n_v; ++i) {
        for (std::size_t j = 0; j < map.n_t; ++j) {
            std::snprintf(buf, sizeof(buf), "%.6f", map.at(i, j));
            if (j) out.push_back(',');
            out += buf;
        }
        out.push_back('\n');
    }
    return out;
}

std::string to_json_string(const AttributionMap& map) {
    json grid = json::array();
    for (std::size_t i = 0; i < map.n_v; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < map.n_t; ++j) row.push_back(map.at(i, j));
        grid.push_back(std::move(row));
    }
    json meta = json::array();
    for (const auto& m : map.prompt_meta)
        meta.push_back({{"attribute", m.attribute}, {"template_id", m.template_id}, {"text", m.text}});
    const json j{{"video_id", map.video_id}, {"category", map.category},
                 {"n_v", map.n_v},           {"n_t", map.n_t},
                 {"grid", grid},             {"row_argmax", map.row_argmax},
                 {"col_argmax", map.col_argmax}, {"prompt_meta", meta}};
    return j.dump(2) + "\n";
}

void export_map(const AttributionMap& map, const std::string& format,
                const std::filesystem::path& path) {
    if (format == "csv")
        write_file_atomic(path, to_csv(map));
    else if (format == "json")
        write_file_atomic(path, to_json_string(map));
    else
        fail("BadParams", "unknown export format '" + format + "'");
}

}  // namespace maka
