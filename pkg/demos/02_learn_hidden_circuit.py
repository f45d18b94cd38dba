"""Learn a hidden shallow circuit from oracle access, then double it.

The Heisenberg images U X_i U^dag and U Z_i U^dag of every site are
local for a shallow U; they are recovered by preparing local densities,
querying the oracle, and tomographing the lightcone ball.  Batching
sites with disjoint lightcones into one query reduces the query count.
The learned images assemble into a circuit for U (x) U^dag out of swaps
and conjugated swaps.
"""

import numpy as np

from quditcirc import (
    QuditRegister,
    TomographySettings,
    assemble_double_circuit,
    batch_learn,
    learn_site_images,
    make_oracle,
    random_brickwork,
    verify_double,
)


def main():
    n, depth = 6, 2
    register = QuditRegister(n, 2)
    hidden = random_brickwork(register, depth, np.random.default_rng(11))
    print(f"hidden circuit: n={n} qubits, depth={depth}, "
          f"{hidden.gate_count} Haar gates (oracle access only)")

    settings = TomographySettings(mode="exact")
    oracle = make_oracle(hidden)
    images = batch_learn(oracle, settings)
    print(f"batched learning used {oracle.queries} oracle queries")

    sequential = make_oracle(hidden)
    for site in range(n):
        learn_site_images(sequential, site, settings)
    print(f"site-by-site learning used {sequential.queries} queries "
          f"(ratio {sequential.queries / oracle.queries:.2f})")

    learned = assemble_double_circuit(images, 2)
    distance = verify_double(learned, hidden)
    print(f"double circuit: {learned.gate_count} gates on {2 * n} qubits, "
          f"distance to V (x) V^dag = {distance:.3e}")

    # sampled mode: finite-shot tomography at the Hoeffding schedule
    small = random_brickwork(QuditRegister(4, 2), 1, np.random.default_rng(12))
    sampled = TomographySettings(mode="sampled", epsilon=0.1, delta=0.1, seed=12)
    imgs = batch_learn(make_oracle(small), sampled)
    noisy = assemble_double_circuit(imgs, 2, tol=1.5)
    print(f"sampled mode (eps=0.1): distance = "
          f"{verify_double(noisy, small):.4f}  (target < 0.1)")


if __name__ == "__main__":
    main()
