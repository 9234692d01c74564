#include "dicoderma/exif.hpp"

#include <algorithm>
#include <set>

#include "dicoderma/error.hpp"

namespace dicoderma {
namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedExif, "malformed EXIF: " + what);
}

class TiffReader {
 public:
  explicit TiffReader(ByteView tiff) : tiff_(tiff) {
    if (tiff_.size() < 8) malformed("TIFF header truncated");
    if (tiff_[0] == 'I' && tiff_[1] == 'I') {
      order_ = ByteOrder::Little;
    } else if (tiff_[0] == 'M' && tiff_[1] == 'M') {
      order_ = ByteOrder::Big;
    } else {
      malformed("unknown byte-order mark");
    }
    if (load_u16(&tiff_[2], order_) != 42) malformed("bad TIFF magic number");
  }

  ByteOrder order() const { return order_; }
  std::uint32_t first_ifd_offset() const { return load_u32(&tiff_[4], order_); }

  struct RawIfd {
    Ifd entries;
    std::uint32_t next = 0;
  };

  RawIfd read_ifd(std::uint32_t offset) {
    if (!visited_.insert(offset).second) malformed("IFD loop");
    if (offset < 8 || std::size_t{offset} + 2 > tiff_.size()) malformed("IFD offset out of range");
    const std::uint16_t count = load_u16(&tiff_[offset], order_);
    const std::size_t table_end = std::size_t{offset} + 2 + std::size_t{count} * 12;
    if (table_end + 4 > tiff_.size()) malformed("IFD table truncated");

    RawIfd ifd;
    ifd.entries.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint8_t* p = &tiff_[offset + 2 + i * 12];
      IfdEntry entry;
      entry.tag = load_u16(p, order_);
      entry.field_type = load_u16(p + 2, order_);
      entry.count = load_u32(p + 4, order_);
      const std::size_t unit = tiff_type_size(entry.field_type);
      if (unit == 0) {
        entry.value.assign(p + 8, p + 12);
      } else {
        const std::uint64_t total = std::uint64_t{unit} * entry.count;
        if (total <= 4) {
          entry.value.assign(p + 8, p + 8 + total);
        } else {
          const std::uint32_t at = load_u32(p + 8, order_);
          if (std::uint64_t{at} + total > tiff_.size()) malformed("value offset out of range");
          entry.value.assign(tiff_.begin() + at, tiff_.begin() + at + static_cast<std::ptrdiff_t>(total));
        }
      }
      ifd.entries.push_back(std::move(entry));
    }
    ifd.next = load_u32(&tiff_[table_end], order_);
    return ifd;
  }

  /// Removes a pointer entry from `ifd` and returns its target offset.
  std::optional<std::uint32_t> take_pointer(Ifd& ifd, std::uint16_t tag) {
    auto it = std::find_if(ifd.begin(), ifd.end(), [&](const IfdEntry& e) { return e.tag == tag; });
    if (it == ifd.end()) return std::nullopt;
    // Type 13 (IFD) is accepted as an alias of LONG.
    if ((it->field_type != tiff_type::kLong && it->field_type != 13) || it->count != 1) {
      malformed("sub-IFD pointer has unexpected type");
    }
    const std::uint32_t offset = load_u32(it->value.data(), order_);
    ifd.erase(it);
    return offset;
  }

  ByteView slice(std::uint32_t offset, std::uint32_t length) const {
    if (std::uint64_t{offset} + length > tiff_.size()) malformed("thumbnail out of range");
    return tiff_.subspan(offset, length);
  }

 private:
  ByteView tiff_;
  ByteOrder order_ = ByteOrder::Little;
  std::set<std::uint32_t> visited_;
};

IfdEntry long_entry(std::uint16_t tag, std::uint32_t value, ByteOrder order) {
  IfdEntry e{tag, tiff_type::kLong, 1, {}};
  append_u32(e.value, value, order);
  return e;
}

std::size_t out_of_line_size(const IfdEntry& e) {
  return e.value.size() > 4 ? (e.value.size() + 1) & ~std::size_t{1} : 0;
}

std::size_t ifd_footprint(const Ifd& ifd) {
  std::size_t size = 2 + 12 * ifd.size() + 4;
  for (const auto& e : ifd) size += out_of_line_size(e);
  return size;
}

void sort_by_tag(Ifd& ifd) {
  std::stable_sort(ifd.begin(), ifd.end(),
                   [](const IfdEntry& a, const IfdEntry& b) { return a.tag < b.tag; });
}

void set_long(Ifd& ifd, std::uint16_t tag, std::uint32_t value, ByteOrder order) {
  for (auto& e : ifd) {
    if (e.tag == tag) e = long_entry(tag, value, order);
  }
}

void write_ifd(Bytes& out, const Ifd& ifd, std::uint32_t next, ByteOrder order) {
  const std::size_t table_start = out.size();
  std::size_t data_at = table_start + 2 + 12 * ifd.size() + 4;
  Bytes data;
  append_u16(out, static_cast<std::uint16_t>(ifd.size()), order);
  for (const auto& e : ifd) {
    append_u16(out, e.tag, order);
    append_u16(out, e.field_type, order);
    append_u32(out, e.count, order);
    if (e.value.size() <= 4) {
      append(out, e.value);
      out.insert(out.end(), 4 - e.value.size(), 0);
    } else {
      append_u32(out, static_cast<std::uint32_t>(data_at + data.size()), order);
      append(data, e.value);
      if (e.value.size() % 2) data.push_back(0);
    }
  }
  append_u32(out, next, order);
  append(out, data);
}

}  // namespace

std::size_t tiff_type_size(std::uint16_t field_type) {
  switch (field_type) {
    case 1: case 2: case 6: case 7: return 1;
    case 3: case 8: return 2;
    case 4: case 9: case 11: case 13: return 4;
    case 5: case 10: case 12: return 8;
    default: return 0;
  }
}

const IfdEntry* find_entry(const Ifd& ifd, std::uint16_t tag) {
  auto it = std::find_if(ifd.begin(), ifd.end(), [&](const IfdEntry& e) { return e.tag == tag; });
  return it == ifd.end() ? nullptr : &*it;
}

void upsert_entry(Ifd& ifd, IfdEntry entry) {
  auto it = std::find_if(ifd.begin(), ifd.end(), [&](const IfdEntry& e) { return e.tag == entry.tag; });
  if (it == ifd.end()) {
    ifd.push_back(std::move(entry));
  } else {
    *it = std::move(entry);
  }
}

ExifBlock decode_exif(ByteView tiff) {
  TiffReader reader(tiff);
  ExifBlock block;
  block.byte_order = reader.order();

  auto ifd0 = reader.read_ifd(reader.first_ifd_offset());
  block.ifd0 = std::move(ifd0.entries);
  if (auto at = reader.take_pointer(block.ifd0, exif_tag::kExifIfdPointer)) {
    block.exif_ifd = reader.read_ifd(*at).entries;
    if (auto interop = reader.take_pointer(block.exif_ifd, exif_tag::kInteropIfdPointer)) {
      block.interop_ifd = reader.read_ifd(*interop).entries;
    }
  }
  if (auto at = reader.take_pointer(block.ifd0, exif_tag::kGpsIfdPointer)) {
    block.gps_ifd = reader.read_ifd(*at).entries;
  }
  if (ifd0.next != 0) {
    Ifd ifd1 = reader.read_ifd(ifd0.next).entries;
    const IfdEntry* length = find_entry(ifd1, exif_tag::kThumbnailLength);
    if (find_entry(ifd1, exif_tag::kThumbnailOffset) && length && length->count == 1 &&
        length->field_type == tiff_type::kLong) {
      const std::uint32_t size = load_u32(length->value.data(), block.byte_order);
      const std::uint32_t offset = *reader.take_pointer(ifd1, exif_tag::kThumbnailOffset);
      auto thumb = reader.slice(offset, size);
      block.thumbnail.assign(thumb.begin(), thumb.end());
      std::erase_if(ifd1, [](const IfdEntry& e) { return e.tag == exif_tag::kThumbnailLength; });
    }
    block.ifd1 = std::move(ifd1);
  }
  return block;
}

Bytes encode_exif(const ExifBlock& block) {
  const ByteOrder order = block.byte_order;
  Ifd ifd0 = block.ifd0;
  Ifd exif = block.exif_ifd;
  Ifd interop = block.interop_ifd;
  Ifd gps = block.gps_ifd;
  std::optional<Ifd> ifd1 = block.ifd1;

  const std::uint16_t structural[] = {exif_tag::kExifIfdPointer, exif_tag::kGpsIfdPointer,
                                      exif_tag::kInteropIfdPointer, exif_tag::kThumbnailOffset,
                                      exif_tag::kThumbnailLength};
  auto strip = [&](Ifd& ifd) {
    std::erase_if(ifd, [&](const IfdEntry& e) {
      return std::find(std::begin(structural), std::end(structural), e.tag) != std::end(structural);
    });
  };
  strip(ifd0);
  strip(exif);
  strip(interop);
  strip(gps);

  const bool has_interop = !interop.empty();
  const bool has_exif = !exif.empty() || has_interop;
  const bool has_gps = !gps.empty();
  const bool has_thumb = ifd1.has_value() && !block.thumbnail.empty();
  if (ifd1) strip(*ifd1);

  // Placeholders first so the table sizes are final before offsets are assigned.
  if (has_exif) ifd0.push_back(long_entry(exif_tag::kExifIfdPointer, 0, order));
  if (has_gps) ifd0.push_back(long_entry(exif_tag::kGpsIfdPointer, 0, order));
  if (has_interop) exif.push_back(long_entry(exif_tag::kInteropIfdPointer, 0, order));
  if (has_thumb) {
    ifd1->push_back(long_entry(exif_tag::kThumbnailOffset, 0, order));
    ifd1->push_back(long_entry(exif_tag::kThumbnailLength,
                               static_cast<std::uint32_t>(block.thumbnail.size()), order));
  }

  std::uint32_t cursor = 8;
  auto place = [&](const Ifd& ifd) {
    const std::uint32_t at = cursor;
    cursor += static_cast<std::uint32_t>(ifd_footprint(ifd));
    return at;
  };
  const std::uint32_t ifd0_at = place(ifd0);
  const std::uint32_t exif_at = has_exif ? place(exif) : 0;
  const std::uint32_t interop_at = has_interop ? place(interop) : 0;
  const std::uint32_t gps_at = has_gps ? place(gps) : 0;
  const std::uint32_t ifd1_at = ifd1 ? place(*ifd1) : 0;
  const std::uint32_t thumb_at = cursor;

  set_long(ifd0, exif_tag::kExifIfdPointer, exif_at, order);
  set_long(ifd0, exif_tag::kGpsIfdPointer, gps_at, order);
  set_long(exif, exif_tag::kInteropIfdPointer, interop_at, order);
  if (has_thumb) set_long(*ifd1, exif_tag::kThumbnailOffset, thumb_at, order);

  for (Ifd* ifd : {&ifd0, &exif, &interop, &gps}) sort_by_tag(*ifd);
  if (ifd1) sort_by_tag(*ifd1);

  Bytes out;
  out.reserve(thumb_at + block.thumbnail.size());
  if (order == ByteOrder::Little) {
    out.insert(out.end(), {'I', 'I'});
  } else {
    out.insert(out.end(), {'M', 'M'});
  }
  append_u16(out, 42, order);
  append_u32(out, ifd0_at, order);
  write_ifd(out, ifd0, ifd1_at, order);
  if (has_exif) write_ifd(out, exif, 0, order);
  if (has_interop) write_ifd(out, interop, 0, order);
  if (has_gps) write_ifd(out, gps, 0, order);
  if (ifd1) write_ifd(out, *ifd1, 0, order);
  if (has_thumb) append(out, block.thumbnail);
  return out;
}

}  // namespace dicoderma
