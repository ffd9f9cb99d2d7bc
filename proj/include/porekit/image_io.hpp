// Copyright 2026 The Porekit Authors
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

#ifndef POREKIT_IMAGE_IO_HPP_
#define POREKIT_IMAGE_IO_HPP_

#include <string>
#include <vector>

#include "porekit/image.hpp"

namespace porekit {

// 8-bit grayscale binary PGM (P5) or PNG, chosen by file content on load and
// by extension on save (.pgm / .png). Levels map to [0,1] by v/255 on load
// and round(v*255) on save.
GrayImage load_image(const std::string& path);
void save_image(const GrayImage& img, const std::string& path);

// Pore ground-truth text files: one "row col" pair per line, 1-indexed on
// disk, 0-indexed in memory.
std::vector<Point> load_ground_truth(const std::string& path);
void save_ground_truth(const std::vector<Point>& pores,
                       const std::string& path);

}  // namespace porekit

#endif  // POREKIT_IMAGE_IO_HPP_
