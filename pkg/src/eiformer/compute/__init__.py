from .autodiff import (
    AllocationProbe,
    Parameter,
    Tape,
    Tensor,
    abs_val,
    add,
    allocation_probe,
    attention_map,
    backward,
    gelu,
    layer_norm,
    log,
    matmul,
    mean_all,
    mul,
    reshape,
    scale,
    softmax_rows,
    sub,
    sum_all,
    transpose,
)
from .gradcheck import grad_check
from .optim import (
    AdamState,
    adam_step,
    clip_grad_norm,
    global_grad_norm,
    parameter_snapshot,
    restore_snapshot,
    zero_grads,
)
