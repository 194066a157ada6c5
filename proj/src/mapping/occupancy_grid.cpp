#include "caris/mapping/occupancy_grid.hpp"

#include <bit>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "caris/json.hpp"

namespace caris::mapping {

static_assert(std::endian::native == std::endian::little, "grid files are little-endian");

std::vector<std::uint8_t> render_map(const OccupancyGrid& grid) {
  cv::Mat image(grid.height(), grid.width(), CV_8UC1);
  for (int y = 0; y < grid.height(); ++y) {
    auto* row = image.ptr<std::uint8_t>(y);
    for (int x = 0; x < grid.width(); ++x) {
      switch (grid.classify(Cell(x, y))) {
        case CellClass::Free:
          row[x] = kFreePixel;
          break;
        case CellClass::Occupied:
          row[x] = kOccupiedPixel;
          break;
        case CellClass::Unknown:
          row[x] = kUnknownPixel;
          break;
      }
    }
  }
  std::vector<std::uint8_t> png;
  cv::imencode(".png", image, png);
  return png;
}

void save_grid(const OccupancyGrid& grid, const std::filesystem::path& base) {
  Json header = Json::object();
  header["resolution"] = grid.resolution();
  header["origin"] = Json{{"x", grid.origin().x}, {"y", grid.origin().y}, {"theta", grid.origin().theta}};
  header["width"] = grid.width();
  header["height"] = grid.height();
  header["dtype"] = "float64";
  header["layout"] = "x-fastest";
  const auto& m = grid.model();
  header["model"] = Json{{"l_occ", m.l_occ}, {"l_free", m.l_free}, {"l_min", m.l_min},
                         {"l_max", m.l_max}, {"t_free", m.t_free}, {"t_occ", m.t_occ}};

  std::ofstream json_out(std::filesystem::path(base).concat(".json"));
  json_out << header.dump(2) << '\n';
  std::ofstream bin_out(std::filesystem::path(base).concat(".bin"), std::ios::binary);
  const auto& data = grid.logodds();
  bin_out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!json_out || !bin_out) throw GridFormatError("failed writing " + base.string());
}

OccupancyGrid load_grid(const std::filesystem::path& base) {
  std::ifstream json_in(std::filesystem::path(base).concat(".json"));
  if (!json_in) throw GridFormatError("missing header for " + base.string());
  Json header;
  try {
    header = Json::parse(json_in);
    if (header.at("dtype") != "float64") throw GridFormatError("unsupported dtype");
    const Json& o = header.at("origin");
    SensorModel<double> model;
    if (header.contains("model")) {
      const Json& m = header.at("model");
      model = {m.at("l_occ"), m.at("l_free"), m.at("l_min"), m.at("l_max"), m.at("t_free"), m.at("t_occ")};
    }
    OccupancyGrid grid(header.at("resolution").get<double>(),
                       {o.at("x").get<double>(), o.at("y").get<double>(), o.value("theta", 0.0)},
                       header.at("width").get<int>(), header.at("height").get<int>(), model);
    OccupancyGrid::Array values(grid.width(), grid.height());
    std::ifstream bin_in(std::filesystem::path(base).concat(".bin"), std::ios::binary);
    bin_in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (bin_in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double))) {
      throw GridFormatError("truncated cell data");
    }
    grid.set_logodds(std::move(values));
    return grid;
  } catch (const Json::exception& e) {
    throw GridFormatError(e.what());
  }
}

}  // namespace caris::mapping
