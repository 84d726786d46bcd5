/* Copyright 2026 The vitdae Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* Exercises the C API from plain C. argv[1] is a scratch directory. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "vitdae/vitdae.h"

static int failures = 0;

#define EXPECT(cond)                                                    \
  do {                                                                  \
    if (!(cond)) {                                                      \
      fprintf(stderr, "%s:%d: expected %s (last error: %s)\n", __FILE__, \
              __LINE__, #cond, vitdae_last_error());                    \
      ++failures;                                                       \
    }                                                                   \
  } while (0)

static const char* kTiny =
    "{\"epochs\": 1, \"batch_size\": 8, \"lr\": 0.002, \"seed\": 1,"
    " \"encoder\": {\"image_size\": 8, \"patch_size\": 2, \"embed_dim\": 16, \"depth\": 1,"
    "               \"heads\": 2, \"code_dim\": 8},"
    " \"unet\": {\"image_size\": 8, \"base_channels\": 8, \"channel_mults\": [1, 2],"
    "            \"res_blocks\": 1, \"attention_resolutions\": [4], \"attention_heads\": 2,"
    "            \"time_dim\": 16, \"cond_dim\": 8, \"groups\": 4},"
    " \"latent\": {\"code_dim\": 8, \"width\": 16, \"time_dim\": 8}}";

static void test_basics(void) {
  size_t i;
  int found_sample = 0;
  EXPECT(strcmp(vitdae_version(), "0.1.0") == 0);
  EXPECT(strcmp(vitdae_status_name(VITDAE_OK), "ok") == 0);
  EXPECT(strcmp(vitdae_status_name(VITDAE_ERR_CONFIG), "config") == 0);
  EXPECT(vitdae_command_count() == 10);
  for (i = 0; i < vitdae_command_count(); ++i)
    found_sample |= strcmp(vitdae_command_name(i), "sample") == 0;
  EXPECT(found_sample);
  EXPECT(vitdae_command_name(10) == NULL);
}

static void test_config(void) {
  const char* keys[] = {"per_class", "seed"};
  const char* values[] = {"3", "9"};
  char* eff = NULL;
  EXPECT(vitdae_command_config("toygen", "{\"resolution\": 8}", keys, values, 2, &eff) == VITDAE_OK);
  EXPECT(eff != NULL);
  if (eff) {
    EXPECT(strstr(eff, "\"per_class\": 3") != NULL);
    EXPECT(strstr(eff, "\"resolution\": 8") != NULL);
    vitdae_string_free(eff);
  }
  eff = NULL;
  EXPECT(vitdae_command_config("toygen", "{\"bogus\": 1}", NULL, NULL, 0, &eff) == VITDAE_ERR_CONFIG);
  EXPECT(strstr(vitdae_last_error(), "bogus") != NULL);
  EXPECT(eff == NULL);
  EXPECT(vitdae_command_config("no-such", NULL, NULL, NULL, 0, &eff) == VITDAE_ERR_INVALID_ARGUMENT);
  EXPECT(vitdae_command_config("toygen", "{not json", NULL, NULL, 0, &eff) == VITDAE_ERR_CONFIG);
  EXPECT(vitdae_command_config("toygen", NULL, NULL, NULL, 0, NULL) == VITDAE_ERR_INVALID_ARGUMENT);
}

static void test_pipeline(const char* scratch) {
  vitdae_dataset* data = NULL;
  vitdae_stage1* model = NULL;
  vitdae_stage1* loaded = NULL;
  vitdae_latent* latent = NULL;
  size_t count = 0;
  int channels = 0, resolution = 0, classes = 0, code_dim = 0;
  const float* pixels = NULL;
  const int* labels = NULL;
  const char* name = NULL;
  double loss = NAN, mse = NAN;
  float codes[8 * 8], codes2[8 * 8], recon[8 * 3 * 8 * 8], decoded[2 * 3 * 8 * 8];
  char path[1024];
  size_t i;

  EXPECT(vitdae_dataset_toy("{\"resolution\": 8, \"per_class\": 2, \"self_check\": false}", &data) == VITDAE_OK);
  EXPECT(vitdae_dataset_info(data, &count, &channels, &resolution, &classes) == VITDAE_OK);
  EXPECT(count == 8 && channels == 3 && resolution == 8 && classes == 4);
  EXPECT(vitdae_dataset_pixels(data, &pixels, &labels) == VITDAE_OK);
  EXPECT(pixels != NULL && labels != NULL && labels[0] == 0 && labels[7] == 3);
  EXPECT(vitdae_dataset_class_name(data, 0, &name) == VITDAE_OK && strcmp(name, "blob") == 0);
  EXPECT(vitdae_dataset_class_name(data, 4, &name) == VITDAE_ERR_INVALID_ARGUMENT);

  snprintf(path, sizeof path, "%s/toy", scratch);
  EXPECT(vitdae_dataset_write(data, path) == VITDAE_OK);
  {
    vitdae_dataset* back = NULL;
    size_t n2 = 0;
    EXPECT(vitdae_dataset_ingest(path, 8, &back) == VITDAE_OK);
    EXPECT(vitdae_dataset_info(back, &n2, NULL, NULL, NULL) == VITDAE_OK && n2 == 8);
    vitdae_dataset_free(back);
  }
  snprintf(path, sizeof path, "%s/missing", scratch);
  {
    vitdae_dataset* none = NULL;
    EXPECT(vitdae_dataset_ingest(path, 8, &none) != VITDAE_OK);
    EXPECT(none == NULL);
  }

  EXPECT(vitdae_stage1_create("{\"encoder\": {\"code_dim\": 3}}", &model) == VITDAE_ERR_CONFIG);
  EXPECT(vitdae_stage1_create(kTiny, &model) == VITDAE_OK);
  EXPECT(vitdae_stage1_info(model, &channels, &resolution, &code_dim) == VITDAE_OK);
  EXPECT(channels == 3 && resolution == 8 && code_dim == 8);
  EXPECT(vitdae_stage1_train(model, kTiny, data, &loss) == VITDAE_OK);
  EXPECT(isfinite(loss));
  EXPECT(vitdae_stage1_encode(model, pixels, 8, codes) == VITDAE_OK);
  EXPECT(vitdae_stage1_reconstruct(model, pixels, 8, 5, recon, &mse) == VITDAE_OK);
  EXPECT(isfinite(mse));
  EXPECT(vitdae_stage1_decode(model, codes, 2, 4, 5, decoded) == VITDAE_OK);
  for (i = 0; i < 2 * 3 * 8 * 8; ++i) EXPECT(decoded[i] >= -1.0f && decoded[i] <= 1.0f);

  snprintf(path, sizeof path, "%s/stage1", scratch);
  EXPECT(vitdae_stage1_save(model, path) == VITDAE_OK);
  EXPECT(vitdae_stage1_load(path, &loaded) == VITDAE_OK);
  EXPECT(vitdae_stage1_encode(loaded, pixels, 8, codes2) == VITDAE_OK);
  EXPECT(memcmp(codes, codes2, sizeof codes) == 0);
  EXPECT(vitdae_latent_load(path, &latent) == VITDAE_ERR_CONFIG);
  EXPECT(latent == NULL);
  snprintf(path, sizeof path, "%s/nothing", scratch);
  EXPECT(vitdae_stage1_load(path, &loaded) == VITDAE_ERR_IO);

  EXPECT(vitdae_stage1_encode(NULL, pixels, 8, codes) == VITDAE_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(vitdae_last_error()) > 0);
  EXPECT(vitdae_generate(model, NULL, 0, 1, 5, 5, decoded) == VITDAE_ERR_INVALID_ARGUMENT);

  vitdae_stage1_free(loaded);
  vitdae_stage1_free(model);
  vitdae_dataset_free(data);
  vitdae_stage1_free(NULL);
  vitdae_latent_free(NULL);
  vitdae_dataset_free(NULL);
}

static void test_commands(const char* scratch) {
  char cfg[2048], *eff = NULL, *result = NULL;
  vitdae_stage1* model = NULL;
  vitdae_latent* latent = NULL;
  int label = -2, code_dim = 0;
  const char* class_name = NULL;
  float images[3 * 3 * 8 * 8];
  char path[1024];

  snprintf(cfg, sizeof cfg, "{\"out\": \"%s/cmd_toy\", \"resolution\": 8, \"per_class\": 4, \"self_check\": false}",
           scratch);
  EXPECT(vitdae_command_config("toygen", cfg, NULL, NULL, 0, &eff) == VITDAE_OK);
  EXPECT(vitdae_command_run("toygen", eff, &result) == VITDAE_OK);
  EXPECT(result != NULL && strstr(result, "\"images\": 16") != NULL);
  vitdae_string_free(eff);
  vitdae_string_free(result);

  /* Stage 1 then stage 2 through the command layer. */
  snprintf(cfg, sizeof cfg, "%.*s, \"run_dir\": \"%s/cmd_run\", \"dataset\": \"%s/cmd_toy\"}",
           (int)(strlen(kTiny) - 1), kTiny, scratch, scratch);
  EXPECT(vitdae_command_config("train-stage1", cfg, NULL, NULL, 0, &eff) == VITDAE_OK);
  EXPECT(vitdae_command_run("train-stage1", eff, &result) == VITDAE_OK);
  vitdae_string_free(eff);
  vitdae_string_free(result);
  snprintf(cfg, sizeof cfg,
           "{\"run_dir\": \"%s/cmd_run\", \"dataset\": \"%s/cmd_toy\", \"epochs\": 2, \"batch_size\": 4,"
           " \"class_filter\": [\"stripe\"], \"latent\": {\"width\": 16, \"time_dim\": 8}}",
           scratch, scratch);
  EXPECT(vitdae_command_config("train-stage2", cfg, NULL, NULL, 0, &eff) == VITDAE_OK);
  EXPECT(vitdae_command_run("train-stage2", eff, &result) == VITDAE_OK);
  vitdae_string_free(eff);
  vitdae_string_free(result);

  snprintf(path, sizeof path, "%s/cmd_run/checkpoints/stage1", scratch);
  EXPECT(vitdae_stage1_load(path, &model) == VITDAE_OK);
  snprintf(path, sizeof path, "%s/cmd_run/checkpoints/latent_stripe", scratch);
  EXPECT(vitdae_latent_load(path, &latent) == VITDAE_OK);
  EXPECT(vitdae_latent_info(latent, &label, &class_name, &code_dim) == VITDAE_OK);
  /* Ingest orders classes by folder name: blob, dense, smooth, stripe. */
  EXPECT(label == 3 && strcmp(class_name, "stripe") == 0 && code_dim == 8);
  EXPECT(vitdae_generate(model, latent, 0, 1, 5, 5, images) == VITDAE_OK);
  EXPECT(vitdae_generate(model, latent, 3, 1, 5, 5, images) == VITDAE_OK);
  EXPECT(isfinite(images[0]));
  vitdae_latent_free(latent);
  vitdae_stage1_free(model);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: %s <scratch-dir>\n", argv[0]);
    return 2;
  }
  test_basics();
  test_config();
  test_pipeline(argv[1]);
  test_commands(argv[1]);
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("c api: all checks passed\n");
  return failures ? 1 : 0;
}
