#!/usr/bin/env python3
"""
Genera conjuntos sintéticos de posturas de agarre
Muestrea train/test desde un prior con estructura de sinergias
"""

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from colorama import Fore

from posture.config import get_settings
from posture.dataio import write_pose_csv
from posture.errors import PostureError
from posture.hand_model import default_hand_model
from posture.simulator import DEFAULT_TEST_SIZE, DEFAULT_TRAIN_SIZE, synthetic_dataset


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description='Genera posturas sintéticas de entrenamiento y prueba',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos de uso:
  python generate_poses.py --out-dir data                 # 114 train / 54 test
  python generate_poses.py --out-dir data --seed 7 --train 200
        """
    )
    parser.add_argument('--out-dir', default='data', help='Carpeta de salida (default: data)')
    parser.add_argument('--train', type=int, default=DEFAULT_TRAIN_SIZE, help='Posturas de entrenamiento')
    parser.add_argument('--test', type=int, default=DEFAULT_TEST_SIZE, help='Posturas de prueba')
    parser.add_argument('--seed', type=int, default=None, help='Semilla (default: POSTURE_SEED)')
    parser.add_argument('--leading-variance', type=float, default=600.0,
                        help='Varianza de la primera sinergia en grados² (default: 600)')
    parser.add_argument('--ratio', type=float, default=0.6, help='Decaimiento geométrico de los autovalores')
    args = parser.parse_args(argv)

    seed = get_settings().seed if args.seed is None else args.seed
    try:
        train, test = synthetic_dataset(default_hand_model(), seed, args.train, args.test,
                                        args.leading_variance, args.ratio)
    except (PostureError, ValueError) as e:
        print(f"{Fore.RED}❌ {e}", file=sys.stderr)
        return 1

    out_dir = Path(args.out_dir)
    write_pose_csv(train, out_dir / "train.csv")
    write_pose_csv(test, out_dir / "test.csv")
    print(f"{Fore.GREEN}✓ {train.count} posturas en {out_dir / 'train.csv'}")
    print(f"{Fore.GREEN}✓ {test.count} posturas en {out_dir / 'test.csv'}")
    print(f"{Fore.CYAN}💡 Siguiente paso: python -m posture build-prior {out_dir / 'train.csv'} --out prior.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
