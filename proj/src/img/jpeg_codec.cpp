#include "colorcnn/img/jpeg_codec.hpp"

#include <csetjmp>
#include <cstdio>

#include <jpeglib.h>

#include "colorcnn/core/check.hpp"

namespace colorcnn::img {

namespace {

struct ErrorTrap {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void on_jpeg_error(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<ErrorTrap*>(cinfo->err);
  std::longjmp(trap->jump, 1);
}

}  // namespace

std::vector<uint8_t> encode_jpeg(const RgbImage& im, int quality) {
  COLORCNN_CHECK(quality >= 1 && quality <= 100, "jpeg quality must be in [1,100]");
  validate(im);
  std::vector<uint8_t> row(size_t(im.w) * 3);

  jpeg_compress_struct cinfo;
  ErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = on_jpeg_error;
  unsigned char* buf = nullptr;
  unsigned long buf_len = 0;
  if (setjmp(trap.jump)) {
    jpeg_destroy_compress(&cinfo);
    free(buf);
    throw std::runtime_error("jpeg encode failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &buf_len);
  cinfo.image_width = JDIMENSION(im.w);
  cinfo.image_height = JDIMENSION(im.h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    const float* src = im.at(int(cinfo.next_scanline), 0);
    for (size_t i = 0; i < row.size(); ++i) row[i] = to_u8(src[i]);
    JSAMPROW rp = row.data();
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<uint8_t> out(buf, buf + buf_len);
  free(buf);
  return out;
}

RgbImage decode_jpeg(const std::vector<uint8_t>& bytes) {
  jpeg_decompress_struct cinfo;
  ErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = on_jpeg_error;
  if (setjmp(trap.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("jpeg decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  COLORCNN_CHECK(jpeg_read_header(&cinfo, TRUE) == JPEG_HEADER_OK, "bad jpeg header");
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  RgbImage im(int(cinfo.output_height), int(cinfo.output_width));
  std::vector<uint8_t> row(size_t(im.w) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    int y = int(cinfo.output_scanline);
    JSAMPROW rp = row.data();
    jpeg_read_scanlines(&cinfo, &rp, 1);
    float* dst = im.at(y, 0);
    for (size_t i = 0; i < row.size(); ++i) dst[i] = from_u8(row[i]);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return im;
}

}  // namespace colorcnn::img
