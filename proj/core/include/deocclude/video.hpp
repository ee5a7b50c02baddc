#pragma once

#include <string>
#include <vector>

#include "deocclude/image.hpp"

namespace deoc {

/// Decodes every `stride`-th frame of a video file, in temporal order,
/// converted to [0,1] RGB. Throws DecodeError for unreadable files and
/// EmptyInputError when the file decodes to zero frames.
std::vector<Image> extract_frames(const std::string& video_path, int stride);

/// Counterpart used by fixtures and tooling: writes frames as an MJPEG AVI.
void write_video(const std::string& path, const std::vector<Image>& frames, double fps = 30.0);

}  // namespace deoc
