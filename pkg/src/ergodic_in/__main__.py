from ergodic_in.cli import main



raise SystemExit(main())
