/* Copyright 2026 The vitdae Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the vitdae library. Every function returns a status code;
 * on failure vitdae_last_error() describes the problem (thread-local, valid
 * until the next call on the same thread). Objects are opaque handles owned
 * by the caller and released with the matching *_free function. Images are
 * float32 in [-1, 1], laid out N x C x H x W.
 */
#ifndef VITDAE_VITDAE_H_
#define VITDAE_VITDAE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VITDAE_API __declspec(dllexport)
#else
#define VITDAE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vitdae_status {
  VITDAE_OK = 0,
  VITDAE_ERR_INVALID_ARGUMENT = 1,
  VITDAE_ERR_SHAPE = 2,
  VITDAE_ERR_IO = 3,
  VITDAE_ERR_CONFIG = 4,
  VITDAE_ERR_STATE = 5,
  VITDAE_ERR_INTERNAL = 6
} vitdae_status;

typedef struct vitdae_dataset vitdae_dataset;
typedef struct vitdae_stage1 vitdae_stage1;
typedef struct vitdae_latent vitdae_latent;

VITDAE_API const char* vitdae_version(void);
VITDAE_API const char* vitdae_last_error(void);
VITDAE_API const char* vitdae_status_name(vitdae_status status);
/* Releases strings returned through char** out-parameters. */
VITDAE_API void vitdae_string_free(char* s);

/* Commands: toygen, train-stage1, train-stage2, sample, reconstruct, encode,
 * eval-fid, eval-pr, manifold-plot, downstream. */
VITDAE_API size_t vitdae_command_count(void);
VITDAE_API const char* vitdae_command_name(size_t index);
/* Merges the command defaults, an optional JSON config (may be NULL) and
 * dotted-key overrides into the effective config. */
VITDAE_API vitdae_status vitdae_command_config(const char* command, const char* config_json,
                                               const char* const* override_keys,
                                               const char* const* override_values,
                                               size_t override_count, char** effective_json);
/* Runs a command on an effective config; *result_json summarizes outputs. */
VITDAE_API vitdae_status vitdae_command_run(const char* command, const char* effective_json,
                                            char** result_json);

/* Datasets. */
VITDAE_API vitdae_status vitdae_dataset_ingest(const char* dir, int resolution,
                                               vitdae_dataset** out);
/* spec_json: toy spec fields (classes, per_class, resolution, seed, ...). */
VITDAE_API vitdae_status vitdae_dataset_toy(const char* spec_json, vitdae_dataset** out);
VITDAE_API vitdae_status vitdae_dataset_write(const vitdae_dataset* data, const char* dir);
VITDAE_API vitdae_status vitdae_dataset_info(const vitdae_dataset* data, size_t* count,
                                             int* channels, int* resolution, int* classes);
/* Borrowed pointers, valid while the dataset lives. */
VITDAE_API vitdae_status vitdae_dataset_pixels(const vitdae_dataset* data, const float** pixels,
                                               const int** labels);
VITDAE_API vitdae_status vitdae_dataset_class_name(const vitdae_dataset* data, int label,
                                                   const char** name);
VITDAE_API void vitdae_dataset_free(vitdae_dataset* data);

/* Stage-1 models (encoder + conditional noise predictor). */
VITDAE_API vitdae_status vitdae_stage1_create(const char* train_config_json, vitdae_stage1** out);
VITDAE_API vitdae_status vitdae_stage1_load(const char* path, vitdae_stage1** out);
VITDAE_API vitdae_status vitdae_stage1_save(const vitdae_stage1* model, const char* path);
VITDAE_API vitdae_status vitdae_stage1_info(const vitdae_stage1* model, int* channels,
                                            int* resolution, int* code_dim);
/* Trains in place; *final_loss may be NULL. */
VITDAE_API vitdae_status vitdae_stage1_train(vitdae_stage1* model, const char* train_config_json,
                                             const vitdae_dataset* data, double* final_loss);
/* codes: n x code_dim, unnormalized. */
VITDAE_API vitdae_status vitdae_stage1_encode(const vitdae_stage1* model, const float* images,
                                              size_t n, float* codes);
VITDAE_API vitdae_status vitdae_stage1_decode(const vitdae_stage1* model, const float* codes,
                                              size_t n, uint64_t seed, int steps, float* images);
VITDAE_API vitdae_status vitdae_stage1_reconstruct(const vitdae_stage1* model,
                                                   const float* images, size_t n, int steps,
                                                   float* out, double* mse);
VITDAE_API void vitdae_stage1_free(vitdae_stage1* model);

/* Latent denoisers. */
VITDAE_API vitdae_status vitdae_latent_load(const char* path, vitdae_latent** out);
VITDAE_API vitdae_status vitdae_latent_info(const vitdae_latent* model, int* label,
                                            const char** class_name, int* code_dim);
VITDAE_API void vitdae_latent_free(vitdae_latent* model);

/* Samples n images (n x C x H x W floats). n may be 0. */
VITDAE_API vitdae_status vitdae_generate(const vitdae_stage1* stage1, const vitdae_latent* latent,
                                         size_t n, uint64_t seed, int image_steps,
                                         int latent_steps, float* images);

#ifdef __cplusplus
}
#endif

#endif /* VITDAE_VITDAE_H_ */
