#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "attriflip/image.hpp"
#include "attriflip/nn.hpp"

namespace attriflip {

// A synthetic binary attribute: its name, which visual factor it drives and
// the probability the factor is present (+1).
struct AttributeSpec {
  std::string name;
  double base_rate = 0.5;
};

enum class Split { Train, Validation, Test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct CorpusItem {
  std::string id;
  Split split = Split::Train;
  std::vector<AttributeLabel> labels;  // one per attribute, +1/-1
  Image image;

  bool operator==(const CorpusItem&) const = default;
};

struct Corpus {
  int height = 0, width = 0, channels = 1;
  std::vector<std::string> attribute_names;
  std::vector<CorpusItem> items;
  std::uint64_t seed = 0;

  int attribute_index(const std::string& name) const;
  std::vector<int> split_indices(Split s) const;

  bool operator==(const Corpus& o) const {
    return height == o.height && width == o.width && channels == o.channels &&
           attribute_names == o.attribute_names && items == o.items;
  }
};

// The default four attributes: a filled circle (present/absent), the stripe
// field orientation (+1 horizontal), the background gradient polarity
// (+1 bright) and the frame thickness (+1 thick, deliberately biased so
// the majority-class baseline is non-trivial to beat).
std::vector<AttributeSpec> default_attributes();

// Attribute pairs whose visual factors share pixels (the stripe field is a
// modulation of the background). Used by portability analyses.
std::vector<std::pair<std::string, std::string>> overlapping_attribute_pairs();

// Renders a deterministic 32x32 grayscale corpus with an 80/10/10
// train/validation/test split. Requires n_images >= 100 and >= 4 attributes.
Corpus generate_corpus(std::uint64_t seed, int n_images,
                       const std::vector<AttributeSpec>& specs,
                       double noise_amplitude = 10.0);

// Directory layout: <dir>/labels.csv plus <dir>/images/<id>.png. The CSV
// header is "id,split,<attribute names...>"; labels are +1/-1.
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

}  // namespace attriflip
