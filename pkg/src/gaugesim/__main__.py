from gaugesim.cli import main

raise SystemExit(main())
