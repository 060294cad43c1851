"""SE(2) group-equivariant convolutions."""
from .group import (IDENTITY, SE2Element, act_on_image, act_on_stack, bin_rotation_matrices,
                    kernel_rotation_matrix, orientation_angles, rotate_kernel, rotation, se2_compose,
                    se2_distance, se2_inverse, theta_shift)
from .layers import (GroupConvLayer, LiftLayer, ProjectLayer, gconv_forward, group_kernel_stack, lift_forward,
                     project_integrate, project_max)
from .model import (band_limited_image, build_gcnn_classifier, build_se2_pipeline, equivariance_error,
                    smooth_kernels)
