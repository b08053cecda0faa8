#include "attriflip/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "attriflip/png_io.hpp"
#include "attriflip/rng.hpp"

namespace attriflip {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation") return Split::Validation;
  if (name == "test") return Split::Test;
  throw std::runtime_error("unknown split name: " + name);
}

int Corpus::attribute_index(const std::string& name) const {
  for (std::size_t i = 0; i < attribute_names.size(); ++i)
    if (attribute_names[i] == name) return static_cast<int>(i);
  throw std::runtime_error("unknown attribute: " + name);
}

std::vector<int> Corpus::split_indices(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].split == s) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<AttributeSpec> default_attributes() {
  return {{"circle", 0.5},
          {"stripes", 0.5},
          {"bright_bg", 0.5},
          {"thick_border", 0.8}};
}

std::vector<std::pair<std::string, std::string>> overlapping_attribute_pairs() {
  return {{"stripes", "bright_bg"}};
}

namespace {

constexpr int kSide = 32;

// All random draws happen in a fixed order, independent of the label values,
// so any single label flip cannot shift the rest of the stream.
Image render_item(Rng& rng, const std::vector<AttributeLabel>& labels,
                  double noise_amplitude) {
  const bool circle_present = labels[0] == +1;
  const bool stripes_horizontal = labels[1] == +1;
  const bool bright_background = labels[2] == +1;
  const bool thick_border = labels[3] == +1;

  const int cx = rand_int(rng, 9, 22);
  const int cy = rand_int(rng, 9, 22);
  const int radius = rand_int(rng, 3, 8);
  const double circle_delta = rand_range(rng, 30.0, 80.0);

  const double stripe_amp = rand_range(rng, 0.04, 0.16);
  const int stripe_period = rand_int(rng, 4, 6);
  const double stripe_phase = rand_range(rng, 0.0, 2.0 * std::numbers::pi);

  const double base = 120.0 + rand_range(rng, -14.0, 14.0);
  // "bright" means the background gradient brightens downward. The ramp and
  // the horizontal stripe field are both vertical luminance structure on the
  // same pixels, which is what couples the two attributes.
  const double ramp =
      (bright_background ? 1.0 : -1.0) * rand_range(rng, 8.0, 24.0);
  const double border_delta = rand_range(rng, 15.0, 45.0);
  const int border_thickness = thick_border ? 2 : 1;

  Image img(kSide, kSide, 1);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      double v = base + ramp * (2.0 * y / (kSide - 1) - 1.0);
      // Stripe field modulates the background multiplicatively, so the two
      // factors share every pixel.
      int along = stripes_horizontal ? y : x;
      v *= 1.0 + stripe_amp *
                     std::sin(2.0 * std::numbers::pi * along / stripe_period +
                              stripe_phase);
      if (circle_present) {
        int dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy <= radius * radius) v += circle_delta;
      }
      int edge = std::min(std::min(x, y), std::min(kSide - 1 - x, kSide - 1 - y));
      if (edge < border_thickness) v -= border_delta;
      v += rand_range(rng, -noise_amplitude, noise_amplitude);
      img.at(y, x) = static_cast<std::uint8_t>(
          std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

}  // namespace

Corpus generate_corpus(std::uint64_t seed, int n_images,
                       const std::vector<AttributeSpec>& specs,
                       double noise_amplitude) {
  if (n_images < 100)
    throw std::invalid_argument("generate_corpus: need at least 100 images");
  if (specs.size() < 4)
    throw std::invalid_argument("generate_corpus: need at least 4 attributes");
  for (const auto& s : specs)
    if (!(s.base_rate > 0.0 && s.base_rate < 1.0))
      throw std::invalid_argument("generate_corpus: base rate must be in (0,1)");
  if (noise_amplitude < 0.0)
    throw std::invalid_argument("generate_corpus: negative noise amplitude");

  Corpus corpus;
  corpus.height = kSide;
  corpus.width = kSide;
  corpus.channels = 1;
  corpus.seed = seed;
  for (const auto& s : specs) corpus.attribute_names.push_back(s.name);

  const int train_end = n_images * 8 / 10;
  const int val_end = n_images * 9 / 10;

  for (int i = 0; i < n_images; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    CorpusItem item;
    char buf[16];
    std::snprintf(buf, sizeof buf, "img_%06d", i);
    item.id = buf;
    item.split = i < train_end ? Split::Train
                 : i < val_end ? Split::Validation
                               : Split::Test;
    for (const auto& s : specs)
      item.labels.push_back(rand_unit(rng) < s.base_rate ? +1 : -1);
    item.image = render_item(rng, item.labels, noise_amplitude);
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  std::ofstream csv(fs::path(dir) / "labels.csv");
  if (!csv) throw std::runtime_error("cannot write labels.csv under " + dir);
  csv << "id,split";
  for (const auto& name : corpus.attribute_names) csv << ',' << name;
  csv << '\n';
  for (const auto& item : corpus.items) {
    csv << item.id << ',' << split_name(item.split);
    for (AttributeLabel l : item.labels) csv << ',' << (l > 0 ? "+1" : "-1");
    csv << '\n';
    write_png(item.image, (fs::path(dir) / "images" / (item.id + ".png")).string());
  }
  if (!csv) throw std::runtime_error("labels.csv write failed under " + dir);
}

Corpus load_corpus(const std::string& dir) {
  std::ifstream csv(fs::path(dir) / "labels.csv");
  if (!csv) throw std::runtime_error("missing labels.csv under " + dir);

  Corpus corpus;
  std::string line;
  if (!std::getline(csv, line))
    throw std::runtime_error("labels.csv is empty");
  {
    std::stringstream header(line);
    std::string field;
    if (!std::getline(header, field, ',') || field != "id")
      throw std::runtime_error("labels.csv: first column must be 'id'");
    if (!std::getline(header, field, ',') || field != "split")
      throw std::runtime_error("labels.csv: second column must be 'split'");
    while (std::getline(header, field, ','))
      corpus.attribute_names.push_back(field);
    if (corpus.attribute_names.empty())
      throw std::runtime_error("labels.csv: no attribute columns");
  }

  int row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    CorpusItem item;
    if (!std::getline(ss, field, ','))
      throw std::runtime_error("labels.csv row " + std::to_string(row) +
                               ": missing id");
    item.id = field;
    if (!std::getline(ss, field, ','))
      throw std::runtime_error("labels.csv row " + std::to_string(row) +
                               ": missing split");
    try {
      item.split = split_from_name(field);
    } catch (const std::exception&) {
      throw std::runtime_error("labels.csv row " + std::to_string(row) +
                               ": bad split '" + field + "'");
    }
    while (std::getline(ss, field, ',')) {
      if (field == "+1" || field == "1")
        item.labels.push_back(+1);
      else if (field == "-1")
        item.labels.push_back(-1);
      else
        throw std::runtime_error("labels.csv row " + std::to_string(row) +
                                 ": label '" + field + "' not in {-1,+1}");
    }
    if (item.labels.size() != corpus.attribute_names.size())
      throw std::runtime_error("labels.csv row " + std::to_string(row) +
                               ": wrong label count");

    fs::path img_path = fs::path(dir) / "images" / (item.id + ".png");
    if (!fs::exists(img_path))
      throw std::runtime_error("corpus references missing image: " +
                               img_path.string());
    item.image = read_png(img_path.string());
    if (corpus.items.empty()) {
      corpus.height = item.image.height;
      corpus.width = item.image.width;
      corpus.channels = item.image.channels;
    } else if (item.image.height != corpus.height ||
               item.image.width != corpus.width ||
               item.image.channels != corpus.channels) {
      throw std::runtime_error("corpus image " + item.id +
                               " has inconsistent dimensions");
    }
    corpus.items.push_back(std::move(item));
  }
  if (corpus.items.empty()) throw std::runtime_error("labels.csv has no rows");
  return corpus;
}

}  // namespace attriflip
