// Copyright 2026 The lqsid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal static SVG charts for the report: stacked line panels, grouped
// bars and a scatter with a box summary. Output is deterministic text.

#ifndef LQSID_SVG_HPP_
#define LQSID_SVG_HPP_

#include <optional>
#include <string>
#include <vector>

#include "lqsid/stats.hpp"

namespace lqsid::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
  bool markers = false;  // points instead of a line
};

struct Panel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
};

// Panels stacked vertically with a shared width. Non-finite points are
// skipped.
std::string line_figure(const std::vector<Panel>& panels, int width = 640,
                        int panel_height = 240);

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per category
};

// Grouped bars. Values below `floor` are clipped to it and marked.
std::string bar_chart(const std::string& title, const std::string& ylabel,
                      const std::vector<std::string>& categories,
                      const std::vector<BarGroup>& groups, double floor = -1.0);

// Scatter panel over x with a horizontal box plot of the x values drawn
// underneath.
std::string scatter_box(const std::string& title, const std::string& xlabel,
                        const std::string& ylabel,
                        const std::vector<Series>& points,
                        const std::optional<BoxSummary>& box);

}  // namespace lqsid::svg

#endif  // LQSID_SVG_HPP_
