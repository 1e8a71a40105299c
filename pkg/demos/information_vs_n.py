"""Expected information gain as a function of the number of detected particles.

The conditioned estimate draws every data set from the no-collapse
likelihood; the gain flattens once the fringes are resolved.

    python3 demos/information_vs_n.py
"""

import warnings

from talbotcsl.errors import TalbotDomainWarning
from talbotcsl.io import GridSpec, maqro_preset
from talbotcsl.pipeline import prepare, run_info

warnings.simplefilter("ignore", TalbotDomainWarning)

scenario, _ = prepare(maqro_preset().replace(grid=GridSpec(shape=(60, 60)), m_iters=30))
print("N       <H> [bits]   Delta")
for n in (30, 100, 300, 1000, 3000, 10_000):
    res = run_info(scenario, n_points=n)
    print(f"{n:<7d} {res.mean:10.4f} {res.delta:9.4f}")
