#pragma once

#include <cstdint>
#include <vector>

#include "listgen/docids.hpp"

namespace listgen {

// Deterministic document embeddings: hashed term-frequency bag-of-words
// followed by a random projection keyed by seed, L2-normalized. Documents
// carrying a precomputed embedding pass it through unchanged (it must have
// the requested dimension). Documents with identical text receive identical
// vectors.
//
// Throws on an empty corpus and on a document with empty text and no
// precomputed embedding.
std::vector<std::vector<double>> embed_corpus(
    const std::vector<Document>& documents, int dim, std::uint64_t seed);

}  // namespace listgen
