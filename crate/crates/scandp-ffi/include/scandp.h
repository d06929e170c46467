/* C interface for the scandp scanning core.
 *
 * Conventions:
 *  - Poses are 9 doubles: translation xyz followed by the first two columns
 *    of the rotation matrix (6D rotation encoding).
 *  - Point clouds are n * 3 doubles, row-major x y z.
 *  - Functions returning int use the SCANDP_* error codes; 0 is success.
 *  - scandp_last_error() describes the most recent failure on this thread.
 */

#ifndef SCANDP_H
#define SCANDP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SCANDP_OK 0
#define SCANDP_ERR_INVALID_ARGUMENT 1
#define SCANDP_ERR_IO 2
#define SCANDP_ERR_MALFORMED 3
#define SCANDP_ERR_NULL_POINTER 4
#define SCANDP_ERR_BUFFER_TOO_SMALL 5
#define SCANDP_ERR_INTERNAL 6

typedef struct ScandpGrid ScandpGrid;
typedef struct ScandpPolicy ScandpPolicy;

/* Message for the most recent error on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread. */
const char *scandp_last_error(void);

/* Occupancy grid over a centered cube. extent / cell_size must be a whole
 * number. Returns NULL on invalid parameters. */
ScandpGrid *scandp_grid_new(double extent, double cell_size);

/* Default workspace: 0.8 m cube at 0.02 m resolution. */
ScandpGrid *scandp_grid_default(void);

void scandp_grid_free(ScandpGrid *grid);

/* Integrate one scan from sensor origin `camera` (3 doubles). */
int scandp_grid_integrate(ScandpGrid *grid, const double *camera,
                          const double *points, size_t n_points);

/* Occupancy probability of cell (i, j, k); unobserved cells give 0.5. */
int scandp_grid_probability(const ScandpGrid *grid, int32_t i, int32_t j,
                            int32_t k, double *out_probability);

/* Number of cells with a non-zero update; 0 for NULL. */
size_t scandp_grid_active_count(const ScandpGrid *grid);

int scandp_grid_save(const ScandpGrid *grid, const char *path);

/* Returns NULL on failure; see scandp_last_error(). */
ScandpGrid *scandp_grid_load(const char *path);

/* Policy checkpoint loading; NULL on failure. */
ScandpPolicy *scandp_policy_load(const char *path);

void scandp_policy_free(ScandpPolicy *policy);

/* Action horizon length of a loaded policy; 0 for NULL. */
size_t scandp_policy_action_horizon(const ScandpPolicy *policy);

/* Sample an action horizon conditioned on the pose history and the grid.
 * `history` is history_len poses; `out_poses` must hold at least
 * scandp_policy_action_horizon(policy) poses (capacity is in poses, not
 * doubles). The produced pose count is written to out_len. */
int scandp_policy_sample(const ScandpPolicy *policy, const ScandpGrid *grid,
                         const double *history, size_t history_len,
                         uint64_t seed, double *out_poses, size_t capacity,
                         size_t *out_len);

/* Safety-filter and sparsify a pose horizon against the grid. `out_poses`
 * must hold n_poses poses; the kept count is written to out_len (0 when
 * every pose was unsafe). */
int scandp_optimize_horizon(const ScandpGrid *grid, const double *poses,
                            size_t n_poses, double kappa_occ, double r_min,
                            double eta, double *out_poses, size_t *out_len);

/* Fraction of `gt` points with a `scan` point within epsilon. */
int scandp_coverage(const double *gt, size_t n_gt, const double *scan,
                    size_t n_scan, double epsilon, double *out_coverage);

#ifdef __cplusplus
}
#endif

#endif /* SCANDP_H */
