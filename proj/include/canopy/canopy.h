/*
 * C interface to the canopy point-cloud library.
 *
 * Objects are opaque handles created by *_read / *_create / pipeline calls
 * and released with the matching *_free. Every fallible call returns a
 * canopy_status; on failure canopy_last_error() describes the problem for
 * the calling thread until that thread's next call into the library.
 */
#ifndef CANOPY_H
#define CANOPY_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#if defined(CANOPY_BUILDING_DLL)
#define CANOPY_API __declspec(dllexport)
#else
#define CANOPY_API __declspec(dllimport)
#endif
#else
#define CANOPY_API __attribute__((visibility("default")))
#endif

typedef enum canopy_status {
  CANOPY_OK = 0,
  CANOPY_ERR_ARGUMENT = 1,
  CANOPY_ERR_PARSE = 2,
  CANOPY_ERR_VALIDATION = 3,
  CANOPY_ERR_FORMAT = 4,
  CANOPY_ERR_TRUNCATED = 5,
  CANOPY_ERR_UNSUPPORTED = 6,
  CANOPY_ERR_IO = 7,
  CANOPY_ERR_CONFIG = 8,
  CANOPY_ERR_INTERNAL = 9
} canopy_status;

typedef struct canopy_config canopy_config;
typedef struct canopy_cloud canopy_cloud;
typedef struct canopy_raster canopy_raster;
typedef struct canopy_grid canopy_grid;
typedef struct canopy_trees canopy_trees;
typedef struct canopy_index_lists canopy_index_lists;

typedef struct canopy_tree_info {
  double stem_x, stem_y;
  double min_x, min_y, min_z;
  double max_x, max_y, max_z;
  uint64_t size;
} canopy_tree_info;

typedef struct canopy_eval_report {
  uint64_t tp, fp, fn;
  double precision, recall, f_score;
} canopy_eval_report;

CANOPY_API const char* canopy_version(void);
CANOPY_API const char* canopy_last_error(void);
CANOPY_API const char* canopy_status_string(canopy_status status);

/* Run configuration (JSON). */
CANOPY_API canopy_status canopy_config_create(canopy_config** out);
CANOPY_API canopy_status canopy_config_load(const char* path, canopy_config** out);
/* key is "section.field", value is JSON text, e.g. ("detector.ret_thresh", "4"). */
CANOPY_API canopy_status canopy_config_set(canopy_config* config, const char* key,
                                           const char* json_value);
/* Numeric field lookup by "section.field". */
CANOPY_API canopy_status canopy_config_get(const canopy_config* config, const char* key,
                                           double* out);
CANOPY_API void canopy_config_free(canopy_config* config);

/* Point clouds: text or LAS 1.2 (detected by the LASF signature). */
CANOPY_API canopy_status canopy_cloud_read(const char* path, canopy_cloud** out);
CANOPY_API canopy_status canopy_cloud_write_text(const canopy_cloud* cloud, const char* path);
CANOPY_API size_t canopy_cloud_size(const canopy_cloud* cloud);
/* Copies interleaved x, y, z of the first `capacity` points into xyz. */
CANOPY_API canopy_status canopy_cloud_positions(const canopy_cloud* cloud, double* xyz,
                                                size_t capacity);
CANOPY_API void canopy_cloud_free(canopy_cloud* cloud);

/* Ground filtering. Either output array may be NULL; each holds one byte
 * per point (1 = ground / 1 = outlier). */
CANOPY_API canopy_status canopy_ground_filter(const canopy_cloud* cloud,
                                              const canopy_config* config, unsigned threads,
                                              uint8_t* ground, uint8_t* outlier);

/* Sparse voxel grid. */
CANOPY_API canopy_status canopy_voxelize(const canopy_cloud* cloud, const canopy_config* config,
                                         unsigned threads, canopy_grid** out);
CANOPY_API size_t canopy_grid_occupied(const canopy_grid* grid);
CANOPY_API uint64_t canopy_grid_dropped(const canopy_grid* grid);
CANOPY_API size_t canopy_grid_occupancy_bytes(const canopy_grid* grid);
CANOPY_API canopy_status canopy_grid_is_occupied(const canopy_grid* grid, uint32_t i, uint32_t j,
                                                 uint32_t k, int* occupied);
CANOPY_API canopy_status canopy_grid_write(const canopy_grid* grid, const char* path);
CANOPY_API canopy_status canopy_grid_read(const char* path, canopy_grid** out);
CANOPY_API void canopy_grid_free(canopy_grid* grid);

/* Rasters. */
CANOPY_API canopy_status canopy_density(const canopy_cloud* cloud, double cell_size,
                                        unsigned threads, canopy_raster** out);
CANOPY_API canopy_status canopy_raster_read(const char* path, canopy_raster** out);
CANOPY_API canopy_status canopy_raster_write_csv(const canopy_raster* raster, const char* path);
CANOPY_API canopy_status canopy_raster_write_pgm(const canopy_raster* raster, const char* path);
CANOPY_API size_t canopy_raster_width(const canopy_raster* raster);
CANOPY_API size_t canopy_raster_height(const canopy_raster* raster);
CANOPY_API size_t canopy_raster_bands(const canopy_raster* raster);
CANOPY_API canopy_status canopy_raster_value(const canopy_raster* raster, size_t col, size_t row,
                                             size_t band, double* out);
CANOPY_API void canopy_raster_free(canopy_raster* raster);

CANOPY_API canopy_status canopy_fuse_spectral(const canopy_cloud* cloud,
                                              const canopy_raster* raster, canopy_cloud** out);

/* Tree detection. */
CANOPY_API canopy_status canopy_detect(const canopy_cloud* cloud, const canopy_config* config,
                                       unsigned threads, canopy_trees** out);
CANOPY_API size_t canopy_trees_count(const canopy_trees* trees);
CANOPY_API canopy_status canopy_trees_get(const canopy_trees* trees, size_t index,
                                          canopy_tree_info* out);
CANOPY_API canopy_status canopy_trees_write_csv(const canopy_trees* trees, const char* path);
CANOPY_API void canopy_trees_free(canopy_trees* trees);

/* Evaluation. Stem arrays are interleaved x, y. */
CANOPY_API canopy_status canopy_stems_read(const char* path, double** xy, size_t* count);
CANOPY_API void canopy_buffer_free(void* buffer);
CANOPY_API canopy_status canopy_evaluate_stems(const double* predicted_xy, size_t predicted_count,
                                               const double* truth_xy, size_t truth_count,
                                               double radius, canopy_eval_report* out);
CANOPY_API canopy_status canopy_evaluate_masks(const uint8_t* predicted, const uint8_t* truth,
                                               size_t count, canopy_eval_report* out);
/* Writes the report as CSV (csv != 0) or aligned text into buf. `needed`
 * receives the full length excluding the terminator. */
CANOPY_API canopy_status canopy_report_format(const canopy_eval_report* report, int csv,
                                              char* buf, size_t capacity, size_t* needed);

/* Dataset sampling. block_count 0 means one block per block_size^2 of the
 * cloud's footprint. */
CANOPY_API canopy_status canopy_sample_blocks(const canopy_cloud* cloud, double block_size,
                                              size_t points_per_block, size_t block_count,
                                              uint64_t seed, canopy_index_lists** out);
/* Furthest point sampling restricted to `subset` (all points when NULL);
 * out receives m indices into the cloud. */
CANOPY_API canopy_status canopy_farthest_point_sampling(const canopy_cloud* cloud,
                                                        const uint32_t* subset,
                                                        size_t subset_count, size_t m,
                                                        uint32_t* out);
CANOPY_API size_t canopy_index_lists_count(const canopy_index_lists* lists);
CANOPY_API canopy_status canopy_index_lists_get(const canopy_index_lists* lists, size_t index,
                                                const uint32_t** data, size_t* length);
CANOPY_API void canopy_index_lists_free(canopy_index_lists* lists);

#ifdef __cplusplus
}
#endif

#endif /* CANOPY_H */
