#include "pecm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace pecm {

double Rng::uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    // Box-Muller; u1 is nudged off zero so log stays finite
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::bounded(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
}

namespace {

constexpr char kMagic[4] = {'P', 'E', 'C', 'M'};
constexpr std::uint16_t kVersion = 1;

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) {
        bytes_.push_back(static_cast<std::uint8_t>(v & 0xff));
        bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        u32(bits);
    }
    void raw(const char* data, std::size_t n) {
        bytes_.insert(bytes_.end(), data, data + n);
    }
    void id(const std::string& s) {
        if (s.empty() || s.size() > 0xffff) {
            throw IoFailure("item id must be 1..65535 bytes, got " + std::to_string(s.size()));
        }
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }

    void flush(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes_.data()),
                  static_cast<std::streamsize>(bytes_.size()));
        if (!out) throw IoFailure("write failed for " + path.string());
    }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::filesystem::path& path) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoFailure("cannot open " + path_);
        in.seekg(0, std::ios::end);
        bytes_.resize(static_cast<std::size_t>(in.tellg()));
        in.seekg(0);
        in.read(reinterpret_cast<char*>(bytes_.data()),
                static_cast<std::streamsize>(bytes_.size()));
        if (!in) throw IoFailure("read failed for " + path_);
    }

    std::size_t offset() const { return pos_; }

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_]) |
                                static_cast<std::uint16_t>(bytes_[pos_ + 1]) << 8;
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string id() {
        const std::uint16_t n = u16();
        if (n == 0) throw ParseError(path_ + ": empty item id at offset " + std::to_string(pos_));
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void expect_end() const {
        if (pos_ != bytes_.size()) {
            throw ParseError(path_ + ": trailing bytes at offset " + std::to_string(pos_));
        }
    }

    const std::string& path() const { return path_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) {
            throw ParseError(path_ + ": truncated at offset " + std::to_string(pos_) +
                             ", need " + std::to_string(n) + " more bytes");
        }
    }

    std::string path_;
    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void write_header(ByteWriter& w, FileModality modality, std::uint32_t item_count,
                  std::uint32_t dim) {
    w.raw(kMagic, 4);
    w.u16(kVersion);
    w.u8(static_cast<std::uint8_t>(modality));
    w.u32(item_count);
    w.u32(dim);
}

struct Header {
    FileModality modality;
    std::uint32_t item_count;
    std::uint32_t dim;
};

Header read_header(ByteReader& r) {
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw BadMagic(r.path() + ": bad magic \"" + std::string(magic, 4) + "\"");
    }
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw VersionMismatch(r.path() + ": unsupported version " + std::to_string(version));
    }
    const std::uint8_t m = r.u8();
    if (m > 2) throw ParseError(r.path() + ": unknown modality byte " + std::to_string(m));
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    if (count == 0) throw ParseError(r.path() + ": item_count must be >= 1");
    if (dim == 0) throw ParseError(r.path() + ": dim must be >= 1");
    return {static_cast<FileModality>(m), count, dim};
}

// Text fixture format: "pecm-text v1" banner, header key-value lines,
// then per-item blocks of whitespace-separated embedding rows. Blank
// lines and `#` comments are allowed anywhere.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path)
        : path_(path.string()), in_(path) {
        if (!in_) throw IoFailure("cannot open " + path_);
    }

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            const std::size_t start = line.find_first_not_of(" \t\r");
            if (start == std::string::npos) continue;
            if (line[start] == '#') continue;
            const std::size_t end = line.find_last_not_of(" \t\r");
            line = line.substr(start, end - start + 1);
            return true;
        }
        return false;
    }

    std::string require(const std::string& what) {
        std::string line;
        if (!next(line)) fail("missing " + what + " (file ends early)");
        return line;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(path_ + ":" + std::to_string(line_no_) + ": " + msg);
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

bool sniff_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    char buf[9] = {};
    in.read(buf, sizeof(buf));
    return in.gcount() == static_cast<std::streamsize>(sizeof(buf)) &&
           std::memcmp(buf, "pecm-text", sizeof(buf)) == 0;
}

std::size_t parse_count(LineReader& r, const std::string& line, const std::string& key) {
    std::istringstream ss(line);
    std::string got_key;
    long long value = -1;
    if (!(ss >> got_key >> value) || got_key != key || value < 1) {
        r.fail("expected `" + key + " <count>`, got \"" + line + "\"");
    }
    return static_cast<std::size_t>(value);
}

struct TextHeader {
    FileModality modality;
    std::size_t item_count = 0;
    std::size_t dim = 0;
    std::size_t rows = 0; // grids only
    std::size_t cols = 0;
    std::size_t k = 0; // prototype sets only
};

TextHeader read_text_header(LineReader& r) {
    if (r.require("banner") != "pecm-text v1") r.fail("expected `pecm-text v1` banner");
    TextHeader h{};
    {
        const std::string line = r.require("modality line");
        std::istringstream ss(line);
        std::string key, value;
        if (!(ss >> key >> value) || key != "modality") r.fail("expected `modality <name>`");
        if (value == "grid") h.modality = FileModality::ImageGrid;
        else if (value == "sentences") h.modality = FileModality::ReportSentences;
        else if (value == "protos") h.modality = FileModality::PrototypeSets;
        else r.fail("unknown modality \"" + value + "\" (grid, sentences, protos)");
    }
    h.item_count = parse_count(r, r.require("items line"), "items");
    h.dim = parse_count(r, r.require("dim line"), "dim");
    if (h.modality == FileModality::ImageGrid) {
        h.rows = parse_count(r, r.require("rows line"), "rows");
        h.cols = parse_count(r, r.require("cols line"), "cols");
    } else if (h.modality == FileModality::PrototypeSets) {
        h.k = parse_count(r, r.require("k line"), "k");
    }
    return h;
}

std::string read_item_line(LineReader& r) {
    const std::string line = r.require("item line");
    std::istringstream ss(line);
    std::string key, id, extra;
    if (!(ss >> key >> id) || key != "item" || (ss >> extra)) {
        r.fail("expected `item <id>`, got \"" + line + "\"");
    }
    return id;
}

Embedding read_text_embedding(LineReader& r, std::size_t dim, const std::string& item_id) {
    const std::string line = r.require("embedding row for item " + item_id);
    std::istringstream ss(line);
    Embedding e(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(ss >> e[i])) r.fail("item " + item_id + ": expected " + std::to_string(dim) +
                                  " values per row");
        if (!std::isfinite(e[i])) r.fail("item " + item_id + ": non-finite value");
    }
    std::string extra;
    if (ss >> extra) r.fail("item " + item_id + ": more than " + std::to_string(dim) +
                            " values in a row");
    return e;
}

void expect_text_end(LineReader& r) {
    std::string line;
    if (r.next(line)) r.fail("trailing content \"" + line + "\" after the declared items");
}

std::vector<std::pair<std::string, PatchGrid>>
load_patch_grids_text(const std::filesystem::path& path) {
    LineReader r(path);
    const TextHeader h = read_text_header(r);
    if (h.modality != FileModality::ImageGrid) r.fail("expected `modality grid`");
    std::vector<std::pair<std::string, PatchGrid>> items;
    items.reserve(h.item_count);
    for (std::size_t i = 0; i < h.item_count; ++i) {
        std::string id = read_item_line(r);
        PatchGrid grid;
        grid.rows = h.rows;
        grid.cols = h.cols;
        for (std::size_t p = 0; p < h.rows * h.cols; ++p) {
            grid.patches.push_back(read_text_embedding(r, h.dim, id));
        }
        grid.global = read_text_embedding(r, h.dim, id);
        items.emplace_back(std::move(id), std::move(grid));
    }
    expect_text_end(r);
    return items;
}

std::vector<std::pair<std::string, SentenceSet>>
load_sentence_sets_text(const std::filesystem::path& path) {
    LineReader r(path);
    const TextHeader h = read_text_header(r);
    if (h.modality != FileModality::ReportSentences) r.fail("expected `modality sentences`");
    std::vector<std::pair<std::string, SentenceSet>> items;
    items.reserve(h.item_count);
    for (std::size_t i = 0; i < h.item_count; ++i) {
        std::string id = read_item_line(r);
        const std::size_t count = parse_count(r, r.require("sentences line"), "sentences");
        SentenceSet ss;
        for (std::size_t s = 0; s < count; ++s) {
            ss.sentences.push_back(read_text_embedding(r, h.dim, id));
        }
        ss.global = read_text_embedding(r, h.dim, id);
        items.emplace_back(std::move(id), std::move(ss));
    }
    expect_text_end(r);
    return items;
}

std::vector<PrototypeSet> load_prototype_sets_text(const std::filesystem::path& path,
                                                   Modality modality) {
    LineReader r(path);
    const TextHeader h = read_text_header(r);
    if (h.modality != FileModality::PrototypeSets) r.fail("expected `modality protos`");
    std::vector<PrototypeSet> items;
    items.reserve(h.item_count);
    for (std::size_t i = 0; i < h.item_count; ++i) {
        PrototypeSet set;
        set.item_id = read_item_line(r);
        set.modality = modality;
        for (std::size_t p = 0; p < h.k; ++p) {
            set.prototypes.push_back(read_text_embedding(r, h.dim, set.item_id));
        }
        items.push_back(std::move(set));
    }
    expect_text_end(r);
    return items;
}

void write_embedding(ByteWriter& w, const Embedding& e) {
    for (double x : e) w.f32(static_cast<float>(x));
}

Embedding read_embedding(ByteReader& r, std::size_t dim, const std::string& item_id) {
    Embedding e(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        e[i] = static_cast<double>(r.f32());
        if (!std::isfinite(e[i])) {
            throw ParseError(r.path() + ": non-finite value in item " + item_id + " at offset " +
                             std::to_string(r.offset()));
        }
    }
    return e;
}

void check_dim(std::size_t got, std::size_t want, const std::string& what) {
    if (got != want) {
        throw DimensionMismatch(what + ": dim " + std::to_string(got) + ", expected " +
                                std::to_string(want));
    }
}

} // namespace

void save_patch_grids(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, PatchGrid>>& items) {
    if (items.empty()) throw IoFailure("save_patch_grids: no items");
    const PatchGrid& first = items.front().second;
    const std::size_t dim = first.global.size();

    ByteWriter w;
    write_header(w, FileModality::ImageGrid, static_cast<std::uint32_t>(items.size()),
                 static_cast<std::uint32_t>(dim));
    w.u32(static_cast<std::uint32_t>(first.rows));
    w.u32(static_cast<std::uint32_t>(first.cols));
    for (const auto& [id, grid] : items) {
        if (grid.rows != first.rows || grid.cols != first.cols) {
            throw DimensionMismatch("save_patch_grids: item " + id +
                                    " grid shape differs from the file layout");
        }
        if (grid.patches.size() != grid.rows * grid.cols) {
            throw DimensionMismatch("save_patch_grids: item " + id + " has " +
                                    std::to_string(grid.patches.size()) + " patches");
        }
        w.id(id);
        for (const Embedding& p : grid.patches) {
            check_dim(p.size(), dim, "save_patch_grids: item " + id);
            write_embedding(w, p);
        }
        check_dim(grid.global.size(), dim, "save_patch_grids: item " + id);
        write_embedding(w, grid.global);
    }
    w.flush(path);
}

std::vector<std::pair<std::string, PatchGrid>>
load_patch_grids(const std::filesystem::path& path) {
    if (sniff_text(path)) return load_patch_grids_text(path);
    ByteReader r(path);
    const Header h = read_header(r);
    if (h.modality != FileModality::ImageGrid) {
        throw ParseError(r.path() + ": expected an image-grid file (modality 0)");
    }
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows == 0 || cols == 0) throw ParseError(r.path() + ": rows and cols must be >= 1");

    std::vector<std::pair<std::string, PatchGrid>> items;
    items.reserve(h.item_count);
    for (std::uint32_t i = 0; i < h.item_count; ++i) {
        std::string id = r.id();
        PatchGrid grid;
        grid.rows = rows;
        grid.cols = cols;
        grid.patches.reserve(static_cast<std::size_t>(rows) * cols);
        for (std::size_t p = 0; p < static_cast<std::size_t>(rows) * cols; ++p) {
            grid.patches.push_back(read_embedding(r, h.dim, id));
        }
        grid.global = read_embedding(r, h.dim, id);
        items.emplace_back(std::move(id), std::move(grid));
    }
    r.expect_end();
    return items;
}

void save_sentence_sets(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, SentenceSet>>& items) {
    if (items.empty()) throw IoFailure("save_sentence_sets: no items");
    const std::size_t dim = items.front().second.global.size();

    ByteWriter w;
    write_header(w, FileModality::ReportSentences, static_cast<std::uint32_t>(items.size()),
                 static_cast<std::uint32_t>(dim));
    for (const auto& [id, ss] : items) {
        if (ss.sentences.empty()) {
            throw IoFailure("save_sentence_sets: item " + id + " has no sentences");
        }
        w.id(id);
        w.u32(static_cast<std::uint32_t>(ss.sentences.size()));
        for (const Embedding& s : ss.sentences) {
            check_dim(s.size(), dim, "save_sentence_sets: item " + id);
            write_embedding(w, s);
        }
        check_dim(ss.global.size(), dim, "save_sentence_sets: item " + id);
        write_embedding(w, ss.global);
    }
    w.flush(path);
}

std::vector<std::pair<std::string, SentenceSet>>
load_sentence_sets(const std::filesystem::path& path) {
    if (sniff_text(path)) return load_sentence_sets_text(path);
    ByteReader r(path);
    const Header h = read_header(r);
    if (h.modality != FileModality::ReportSentences) {
        throw ParseError(r.path() + ": expected a report-sentence file (modality 1)");
    }
    std::vector<std::pair<std::string, SentenceSet>> items;
    items.reserve(h.item_count);
    for (std::uint32_t i = 0; i < h.item_count; ++i) {
        std::string id = r.id();
        const std::uint32_t count = r.u32();
        if (count == 0) throw ParseError(r.path() + ": item " + id + " has zero sentences");
        SentenceSet ss;
        ss.sentences.reserve(count);
        for (std::uint32_t s = 0; s < count; ++s) {
            ss.sentences.push_back(read_embedding(r, h.dim, id));
        }
        ss.global = read_embedding(r, h.dim, id);
        items.emplace_back(std::move(id), std::move(ss));
    }
    r.expect_end();
    return items;
}

void save_prototype_sets(const std::filesystem::path& path,
                         const std::vector<PrototypeSet>& items) {
    if (items.empty()) throw IoFailure("save_prototype_sets: no items");
    const std::size_t k = items.front().k();
    const std::size_t dim = items.front().dim();
    if (k == 0) throw IoFailure("save_prototype_sets: empty prototype set");

    ByteWriter w;
    write_header(w, FileModality::PrototypeSets, static_cast<std::uint32_t>(items.size()),
                 static_cast<std::uint32_t>(dim));
    w.u32(static_cast<std::uint32_t>(k));
    for (const PrototypeSet& set : items) {
        if (set.k() != k) {
            throw MismatchedK("save_prototype_sets: item " + set.item_id + " has K=" +
                              std::to_string(set.k()) + ", file K=" + std::to_string(k));
        }
        w.id(set.item_id);
        for (const Embedding& p : set.prototypes) {
            check_dim(p.size(), dim, "save_prototype_sets: item " + set.item_id);
            write_embedding(w, p);
        }
    }
    w.flush(path);
}

std::vector<PrototypeSet> load_prototype_sets(const std::filesystem::path& path,
                                              Modality modality) {
    if (sniff_text(path)) return load_prototype_sets_text(path, modality);
    ByteReader r(path);
    const Header h = read_header(r);
    if (h.modality != FileModality::PrototypeSets) {
        throw ParseError(r.path() + ": expected a prototype-set file (modality 2)");
    }
    const std::uint32_t k = r.u32();
    if (k == 0) throw ParseError(r.path() + ": K must be >= 1");

    std::vector<PrototypeSet> items;
    items.reserve(h.item_count);
    for (std::uint32_t i = 0; i < h.item_count; ++i) {
        PrototypeSet set;
        set.item_id = r.id();
        set.modality = modality;
        set.prototypes.reserve(k);
        for (std::uint32_t p = 0; p < k; ++p) {
            set.prototypes.push_back(read_embedding(r, h.dim, set.item_id));
        }
        items.push_back(std::move(set));
    }
    r.expect_end();
    return items;
}

FileModality peek_modality(const std::filesystem::path& path) {
    if (sniff_text(path)) {
        LineReader r(path);
        return read_text_header(r).modality;
    }
    ByteReader r(path);
    return read_header(r).modality;
}

void save_pairing(const std::filesystem::path& path,
                  const std::map<std::string, std::set<std::string>>& pairing) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    for (const auto& [rid, imgs] : pairing) {
        for (const std::string& iid : imgs) out << rid << '\t' << iid << '\n';
    }
    if (!out) throw IoFailure("write failed for " + path.string());
}

std::map<std::string, std::set<std::string>> load_pairing(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::map<std::string, std::set<std::string>> pairing;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
            line.find('\t', tab + 1) != std::string::npos) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected `report_id<TAB>image_id`");
        }
        pairing[line.substr(0, tab)].insert(line.substr(tab + 1));
    }
    return pairing;
}

void save_labels(const std::filesystem::path& path,
                 const std::map<std::string, std::string>& labels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    for (const auto& [id, label] : labels) out << id << '\t' << label << '\n';
    if (!out) throw IoFailure("write failed for " + path.string());
}

std::map<std::string, std::string> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::map<std::string, std::string> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected `item_id<TAB>label`");
        }
        labels[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return labels;
}

Corpus load_corpus(const std::filesystem::path& image_path,
                   const std::filesystem::path& report_path,
                   const std::filesystem::path& pairing_path, const LoadOptions& opts) {
    std::map<std::string, PrototypeSet> images;
    const FileModality image_modality = peek_modality(image_path);
    if (image_modality == FileModality::ImageGrid) {
        for (auto& [id, grid] : load_patch_grids(image_path)) {
            images.emplace(id, build_image_prototypes(id, grid, opts.group_size));
        }
    } else if (image_modality == FileModality::PrototypeSets) {
        for (PrototypeSet& set : load_prototype_sets(image_path, Modality::Image)) {
            std::string id = set.item_id;
            images.emplace(std::move(id), std::move(set));
        }
    } else {
        throw ParseError(image_path.string() + ": image file may not hold report sentences");
    }
    const std::size_t k = images.begin()->second.k();

    std::map<std::string, PrototypeSet> reports;
    const FileModality report_modality = peek_modality(report_path);
    if (report_modality == FileModality::ReportSentences) {
        for (auto& [id, ss] : load_sentence_sets(report_path)) {
            reports.emplace(id, build_report_prototypes(id, ss, k));
        }
    } else if (report_modality == FileModality::PrototypeSets) {
        for (PrototypeSet& set : load_prototype_sets(report_path, Modality::Report)) {
            if (set.k() != k) {
                throw MismatchedK(report_path.string() + ": item " + set.item_id + " has K=" +
                                  std::to_string(set.k()) + ", image side has K=" +
                                  std::to_string(k));
            }
            std::string id = set.item_id;
            reports.emplace(std::move(id), std::move(set));
        }
    } else {
        throw ParseError(report_path.string() + ": report file may not hold patch grids");
    }

    return Corpus(std::move(images), std::move(reports), load_pairing(pairing_path));
}

void save_weights(const WeightVector& weights, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << "pecm-weights v1\n";
    out << "k " << weights.k() << "\n";
    char buf[64];
    for (std::size_t i = 0; i < weights.k(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", weights.theta()[i]);
        out << "theta " << i << " " << buf << "\n";
    }
    if (!out) throw IoFailure("write failed for " + path.string());
}

WeightVector load_weights(const std::filesystem::path& path,
                          std::optional<std::size_t> expected_k) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "pecm-weights v1") {
        throw ParseError(path.string() + ":1: expected `pecm-weights v1`");
    }
    std::size_t k = 0;
    {
        if (!std::getline(in, line)) throw ParseError(path.string() + ":2: missing k line");
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key >> k) || key != "k" || k == 0) {
            throw ParseError(path.string() + ":2: expected `k <count>`");
        }
    }
    if (expected_k && k != *expected_k) {
        throw KMismatch(path.string() + ": checkpoint K=" + std::to_string(k) +
                        " does not match corpus K=" + std::to_string(*expected_k));
    }

    std::vector<double> theta(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!std::getline(in, line)) {
            throw ParseError(path.string() + ": missing theta entry " + std::to_string(i));
        }
        std::istringstream ss(line);
        std::string key;
        std::size_t idx = 0;
        double value = 0.0;
        if (!(ss >> key >> idx >> value) || key != "theta" || idx != i) {
            throw ParseError(path.string() + ": malformed theta entry " + std::to_string(i));
        }
        theta[i] = value;
    }
    return WeightVector::from_theta(std::move(theta));
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_pairs == 0) throw InvalidSpec("generate_synthetic: n_pairs must be >= 1");
    if (spec.n_classes == 0 || spec.n_classes > spec.n_pairs) {
        throw InvalidSpec("generate_synthetic: need 1 <= n_classes <= n_pairs");
    }
    if (spec.dim == 0) throw InvalidSpec("generate_synthetic: dim must be >= 1");
    if (spec.k == 0) throw InvalidSpec("generate_synthetic: k must be >= 1");
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
        throw InvalidSpec("generate_synthetic: noise_sigma must be finite and >= 0");
    }
    if (!(spec.ambiguity_sigma >= 0.0) || !std::isfinite(spec.ambiguity_sigma)) {
        throw InvalidSpec("generate_synthetic: ambiguity_sigma must be finite and >= 0");
    }
    if (!(spec.ambiguity_fraction >= 0.0 && spec.ambiguity_fraction <= 1.0)) {
        throw InvalidSpec("generate_synthetic: ambiguity_fraction must be in [0, 1]");
    }

    // Two independent streams: base corpus vs ambiguity corruption, so the
    // base draw pattern is identical across ambiguity settings.
    Rng base(spec.seed);
    Rng ambig(spec.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<std::vector<Embedding>> latents(spec.n_classes);
    for (auto& latent : latents) {
        latent.resize(spec.k, Embedding(spec.dim));
        for (Embedding& proto : latent) {
            for (double& x : proto) x = base.gaussian();
        }
    }

    char buf[32];
    auto image_id = [&](std::size_t i) {
        std::snprintf(buf, sizeof(buf), "img%05zu", i);
        return std::string(buf);
    };
    auto report_id = [&](std::size_t i) {
        std::snprintf(buf, sizeof(buf), "rep%05zu", i);
        return std::string(buf);
    };

    std::map<std::string, PrototypeSet> images;
    std::map<std::string, PrototypeSet> reports;
    std::map<std::string, std::set<std::string>> pairing;
    std::map<std::string, std::string> class_of;

    std::vector<PrototypeSet*> image_ptr(spec.n_pairs);
    std::vector<PrototypeSet*> report_ptr(spec.n_pairs);
    for (std::size_t i = 0; i < spec.n_pairs; ++i) {
        const std::size_t c = i % spec.n_classes;
        std::snprintf(buf, sizeof(buf), "class%03zu", c);
        const std::string label(buf);

        auto draw_set = [&](const std::string& id, Modality modality) {
            PrototypeSet set;
            set.item_id = id;
            set.modality = modality;
            set.prototypes = latents[c];
            for (Embedding& proto : set.prototypes) {
                for (double& x : proto) x += spec.noise_sigma * base.gaussian();
            }
            return set;
        };

        const std::string iid = image_id(i);
        const std::string rid = report_id(i);
        image_ptr[i] = &images.emplace(iid, draw_set(iid, Modality::Image)).first->second;
        report_ptr[i] = &reports.emplace(rid, draw_set(rid, Modality::Report)).first->second;
        pairing[rid].insert(iid);
        class_of[iid] = label;
        class_of[rid] = label;
    }

    // ambiguous subset: first round(fraction * n) entries of a seeded
    // permutation of the pair indices
    const std::size_t n_ambiguous =
        static_cast<std::size_t>(std::llround(spec.ambiguity_fraction *
                                              static_cast<double>(spec.n_pairs)));
    std::vector<std::size_t> perm(spec.n_pairs);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::swap(perm[i - 1], perm[ambig.bounded(i)]);
    }
    std::set<std::size_t> ambiguous(perm.begin(),
                                    perm.begin() + static_cast<std::ptrdiff_t>(n_ambiguous));

    std::set<std::string> ambiguous_images;
    std::set<std::string> ambiguous_reports;
    for (std::size_t i = 0; i < spec.n_pairs; ++i) {
        if (!ambiguous.count(i)) continue;
        ambiguous_images.insert(image_ptr[i]->item_id);
        ambiguous_reports.insert(report_ptr[i]->item_id);

        // corrupt the same floor(K/2) prototype slots on both sides, with
        // independent heavy noise per side
        std::vector<std::size_t> slots(spec.k);
        for (std::size_t s = 0; s < slots.size(); ++s) slots[s] = s;
        for (std::size_t s = slots.size(); s > 1; --s) {
            std::swap(slots[s - 1], slots[ambig.bounded(s)]);
        }
        slots.resize(spec.k / 2);
        std::sort(slots.begin(), slots.end());
        for (std::size_t slot : slots) {
            for (double& x : image_ptr[i]->prototypes[slot]) {
                x += spec.ambiguity_sigma * ambig.gaussian();
            }
            for (double& x : report_ptr[i]->prototypes[slot]) {
                x += spec.ambiguity_sigma * ambig.gaussian();
            }
        }
    }

    return SyntheticCorpus{Corpus(std::move(images), std::move(reports), std::move(pairing)),
                           std::move(class_of), std::move(ambiguous_images),
                           std::move(ambiguous_reports)};
}

} // namespace pecm
